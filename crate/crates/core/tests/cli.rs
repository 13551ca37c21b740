use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use higan::data_io::{read_bundle, read_features, read_network};
use higan::trainer::TrainReport;

fn higan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_higan")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth_small(dir: &Path) {
    let o = higan(&["synth", "--videos-per-class", "4", "--seed", "7", "--out", s(dir)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn synth_writes_seven_consistent_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    let o = higan(&["synth", "--classes", "3", "--videos-per-class", "20", "--seed", "7", "--out", s(&d)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<_> = fs::read_dir(&d).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 7, "{names:?}");
    let b = read_bundle(&d).unwrap();
    b.validate().unwrap();
    assert_eq!(b.clips.video_count(), 60);
    assert_eq!((b.f.cols(), b.v.cols(), b.h_f.cols()), (6, 4, 5));
}

#[test]
fn synth_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth_small(&a);
    synth_small(&b);
    for e in fs::read_dir(&a).unwrap() {
        let name = e.unwrap().file_name();
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn single_class_synth_is_a_bad_spec() {
    let tmp = tempfile::tempdir().unwrap();
    let o = higan(&["synth", "--classes", "1", "--out", s(tmp.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:bad_spec:"), "{}", stderr(&o));
}

#[test]
fn zero_iteration_pipeline_emits_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let (bundle, out) = (tmp.path().join("b"), tmp.path().join("o"));
    synth_small(&bundle);
    let o = higan(&["pipeline", "--bundle", s(&bundle), "--out", s(&out), "--iterations", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.starts_with("accuracy=") && line.trim().len() == "accuracy=0.0000".len(), "{line}");

    let b = read_bundle(&bundle).unwrap();
    let h_t = read_features(&out.join("H_t.hgf")).unwrap();
    assert_eq!(h_t.shape(), (b.clips.video_count(), 5));
    assert_eq!(read_features(&out.join("H_s.hgf")).unwrap().shape(), b.h_s.shape());
    for net in ["low_generator", "low_discriminator", "high_generator", "high_discriminator"] {
        read_network(&out.join(net)).unwrap();
    }
    let metrics = fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert_eq!(metrics.lines().next().unwrap(), line.trim());
    let csv = fs::read_to_string(out.join("low_report.csv")).unwrap();
    assert_eq!(csv.trim(), TrainReport::CSV_HEADER);
}

#[test]
fn coral_only_pipeline_reports_zero_weighted_adversarial_term() {
    let tmp = tempfile::tempdir().unwrap();
    let (bundle, out) = (tmp.path().join("b"), tmp.path().join("o"));
    synth_small(&bundle);
    let o = higan(&[
        "pipeline", "--bundle", s(&bundle), "--out", s(&out), "--iters", "25",
        "--ablation", "coral_only", "--reg-weight", "0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("high_report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(TrainReport::CSV_HEADER));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 25);
    for r in rows {
        // With the regularizer off the total is the CORAL term at weight 100.
        assert_eq!(r[5], 100.0 * r[3]);
        assert!(r[2] > 0.0);
    }
}

#[test]
fn stagewise_commands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let (bundle, low, high) = (tmp.path().join("b"), tmp.path().join("low"), tmp.path().join("high"));
    synth_small(&bundle);
    let o = higan(&["train-low", "--bundle", s(&bundle), "--out", s(&low), "--iters", "30", "--preset", "compact"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(low.join("V_f.hgf").exists());
    let o = higan(&[
        "train-high", "--bundle", s(&bundle), "--low", s(&low), "--out", s(&high), "--iters", "30",
        "--preset", "compact",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("accuracy="));
    assert_eq!(read_features(&high.join("H_t.hgf")).unwrap().cols(), 5);
}

#[test]
fn eval_reports_four_decimals_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let b = tmp.path().join("b");
    synth_small(&b);
    let (hs, ls) = (b.join("H_s.hgf"), b.join("labels_s.txt"));
    let args = ["eval", "--hs", s(&hs), "--labels-s", s(&ls), "--ht", s(&hs), "--labels-t", s(&ls)];
    let first = higan(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    assert_eq!(stdout(&first), "accuracy=1.0000\n");
    assert_eq!(stdout(&higan(&args)), stdout(&first));
}

#[test]
fn eval_dimension_mismatch_names_both_dims() {
    let tmp = tempfile::tempdir().unwrap();
    let b = tmp.path().join("b");
    synth_small(&b);
    let o = higan(&[
        "eval", "--hs", s(&b.join("H_s.hgf")), "--labels-s", s(&b.join("labels_s.txt")),
        "--ht", s(&b.join("V.hgf")), "--labels-t", s(&b.join("labels_t.txt")),
    ]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error:shape_mismatch:"), "{err}");
    assert!(err.contains(", 5)") && err.contains(", 4)"), "{err}");
}

#[test]
fn errors_carry_a_kind_prefix() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nothing");
    let o = higan(&["pipeline", "--bundle", s(&missing), "--out", s(tmp.path())]);
    assert!(stderr(&o).starts_with("error:io:"), "{}", stderr(&o));
    assert!(!o.status.success());

    let bad = tmp.path().join("bad.hgf");
    let mut header = higan::data_io::encode_header(0, 1).to_vec();
    header[0] = b'X';
    fs::write(&bad, header).unwrap();
    let o = higan(&["eval", "--hs", s(&bad), "--labels-s", s(&bad), "--ht", s(&bad), "--labels-t", s(&bad)]);
    assert!(stderr(&o).starts_with("error:bad_magic:"), "{}", stderr(&o));

    let o = higan(&["pipeline", "--no-such-flag"]);
    assert!(stderr(&o).starts_with("error:usage:"), "{}", stderr(&o));
    assert_eq!(o.status.code(), Some(2));
}
