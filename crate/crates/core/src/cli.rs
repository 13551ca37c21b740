//! Argument definitions and command implementations for the `higan` binary.
//!
//! Every command writes its artifacts under `--out` and its one-line summary
//! to the supplied writer, so the same code paths are testable in-process.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Ablation, Architecture, TrainConfig};
use crate::data_io::{self, read_bundle, read_features, read_labels, synthesize, write_bundle, SynthSpec};
use crate::error::{HiganError, Result};
use crate::linalg::Matrix;
use crate::pipeline::{self, evaluate_transfer, initial_levels, resolve_for};
use crate::trainer::{GanLevel, TrainReport};

/// Artifact names inside an output directory.
pub mod artifacts {
    pub const H_T: &str = "H_t.hgf";
    pub const H_S: &str = "H_s.hgf";
    pub const V_F: &str = "V_f.hgf";
    pub const H_V: &str = "H_v.hgf";
    pub const LOW_GENERATOR: &str = "low_generator";
    pub const LOW_DISCRIMINATOR: &str = "low_discriminator";
    pub const HIGH_GENERATOR: &str = "high_generator";
    pub const HIGH_DISCRIMINATOR: &str = "high_discriminator";
    pub const LOW_REPORT: &str = "low_report.csv";
    pub const HIGH_REPORT: &str = "high_report.csv";
    pub const METRICS: &str = "metrics.txt";
}

#[derive(Debug, Parser)]
#[command(name = "higan", version, about = "Two-level conditional GAN feature adaptation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic bundle with known ground truth.
    Synth(SynthArgs),
    /// Train the frame→clip level and write V_f.
    TrainLow(TrainLowArgs),
    /// Train the clip→image-frame level from a train-low output directory.
    TrainHigh(TrainHighArgs),
    /// Run both levels, clip averaging and evaluation.
    Pipeline(PipelineArgs),
    /// Fit the source classifier and print target accuracy.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 20)]
    pub videos_per_class: usize,
    #[arg(long, default_value_t = 5)]
    pub clips_min: usize,
    #[arg(long, default_value_t = 10)]
    pub clips_max: usize,
    #[arg(long, default_value_t = 40)]
    pub images_per_class: usize,
    #[arg(long, default_value_t = 6)]
    pub d_f: usize,
    #[arg(long, default_value_t = 4)]
    pub d_v: usize,
    #[arg(long, default_value_t = 5)]
    pub d_h: usize,
    /// Noise scale as a fraction of the minimum prototype distance.
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl SynthArgs {
    pub fn spec(&self) -> SynthSpec {
        SynthSpec {
            classes: self.classes,
            videos_per_class: self.videos_per_class,
            clips_min: self.clips_min,
            clips_max: self.clips_max,
            images_per_class: self.images_per_class,
            d_f: self.d_f,
            d_v: self.d_v,
            d_h: self.d_h,
            sigma: self.sigma,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Published settings.
    Published,
    /// Settings calibrated for low-dimensional data.
    Compact,
}

/// Training flags. Anything omitted falls back to the chosen preset.
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    #[arg(long, value_enum, default_value_t = Preset::Published)]
    pub preset: Preset,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub lambda3: Option<f64>,
    #[arg(long)]
    pub lambda4: Option<f64>,
    #[arg(long)]
    pub lr_low: Option<f64>,
    #[arg(long)]
    pub lr_high: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, visible_alias = "iterations")]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ablation: Option<Ablation>,
    /// Hidden width: `published`, `auto` or a positive integer.
    #[arg(long)]
    pub hidden: Option<Architecture>,
    #[arg(long)]
    pub reg_weight: Option<f64>,
    #[arg(long)]
    pub classifier_iters: Option<usize>,
}

impl TrainFlags {
    pub fn config(&self) -> TrainConfig {
        let mut cfg = match self.preset {
            Preset::Published => TrainConfig::default(),
            Preset::Compact => TrainConfig::compact(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$field = v; })*
            };
        }
        set!(lambda1 => lambda1, lambda2 => lambda2, lambda3 => lambda3, lambda4 => lambda4,
             lr_low => lr_low, lr_high => lr_high, batch => batch_size, iters => iterations,
             seed => seed, ablation => ablation, hidden => architecture,
             classifier_iters => classifier_max_iters);
        if self.reg_weight.is_some() {
            cfg.reg_weight = self.reg_weight;
        }
        cfg
    }
}

#[derive(Debug, Args)]
pub struct TrainLowArgs {
    /// Directory holding a bundle as written by `synth`.
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct TrainHighArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Output directory of a previous `train-low` run.
    #[arg(long)]
    pub low: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub hs: PathBuf,
    #[arg(long)]
    pub labels_s: PathBuf,
    #[arg(long)]
    pub ht: PathBuf,
    #[arg(long)]
    pub labels_t: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().classifier_max_iters)]
    pub classifier_iters: usize,
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::TrainLow(a) => cmd_train_low(a),
        Command::TrainHigh(a) => cmd_train_high(a, out),
        Command::Pipeline(a) => cmd_pipeline(a, out),
        Command::Eval(a) => cmd_eval(a, out),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HiganError::io(dir, e))
}

fn emit(out: &mut dyn Write, line: &str) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| HiganError::io("<stdout>", e))
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    if a.classes < 2 {
        return Err(HiganError::BadSpec(format!(
            "--classes must be at least 2 for a transfer task, got {}",
            a.classes
        )));
    }
    let bundle = synthesize(&a.spec())?;
    create_dir(&a.out)?;
    write_bundle(&a.out, &bundle)
}

fn write_level(dir: &Path, level: &GanLevel, report: &TrainReport, names: [&str; 3]) -> Result<()> {
    data_io::write_network(&dir.join(names[0]), &level.generator)?;
    data_io::write_network(&dir.join(names[1]), &level.discriminator)?;
    report.write_csv(&dir.join(names[2]))
}

const LOW_NAMES: [&str; 3] = [artifacts::LOW_GENERATOR, artifacts::LOW_DISCRIMINATOR, artifacts::LOW_REPORT];
const HIGH_NAMES: [&str; 3] = [artifacts::HIGH_GENERATOR, artifacts::HIGH_DISCRIMINATOR, artifacts::HIGH_REPORT];

fn format_accuracy(acc: f64) -> String {
    format!("accuracy={acc:.4}")
}

/// Writes `metrics.txt` and prints the accuracy line, when there is one.
fn report_accuracy(dir: &Path, accuracy: Option<f64>, baseline: Option<f64>, out: &mut dyn Write) -> Result<()> {
    let Some(acc) = accuracy else { return Ok(()) };
    let mut text = format_accuracy(acc) + "\n";
    if let Some(b) = baseline {
        text += &format!("baseline_accuracy={b:.4}\n");
    }
    let path = dir.join(artifacts::METRICS);
    fs::write(&path, text).map_err(|e| HiganError::io(&path, e))?;
    emit(out, &format_accuracy(acc))
}

/// Accuracy of `h_t` and of the per-video frame-feature means.
fn accuracies(bundle: &data_io::DomainBundle, h_t: &Matrix, cfg: &TrainConfig) -> Result<(Option<f64>, Option<f64>)> {
    let Some(labels_t) = &bundle.labels_t else { return Ok((None, None)) };
    let acc = evaluate_transfer(&bundle.h_s, &bundle.labels_s, h_t, labels_t, cfg)?;
    let means = pipeline::average_clips(&bundle.h_f, &bundle.clips)?;
    let base = evaluate_transfer(&bundle.h_s, &bundle.labels_s, &means, labels_t, cfg)?;
    Ok((Some(acc), Some(base)))
}

pub fn cmd_train_low(a: &TrainLowArgs) -> Result<()> {
    let bundle = read_bundle(&a.bundle)?;
    let cfg = resolve_for(&bundle, &a.train.config());
    cfg.validate()?;
    let (low, _) = initial_levels(&bundle, &cfg)?;
    let (low, report, v_f) = pipeline::low_stage(&bundle, &cfg, low)?;
    create_dir(&a.out)?;
    write_level(&a.out, &low, &report, LOW_NAMES)?;
    data_io::write_features(&a.out.join(artifacts::V_F), &v_f)
}

pub fn cmd_train_high(a: &TrainHighArgs, out: &mut dyn Write) -> Result<()> {
    let bundle = read_bundle(&a.bundle)?;
    let cfg = resolve_for(&bundle, &a.train.config());
    cfg.validate()?;
    let low_generator = data_io::read_network(&a.low.join(artifacts::LOW_GENERATOR))?;
    let v_f = low_generator.predict(&bundle.f)?;
    let (_, high) = initial_levels(&bundle, &cfg)?;
    let (high, report, h_v, h_t) = pipeline::high_stage(&bundle, &cfg, high, &v_f)?;
    create_dir(&a.out)?;
    write_level(&a.out, &high, &report, HIGH_NAMES)?;
    data_io::write_features(&a.out.join(artifacts::H_V), &h_v)?;
    data_io::write_features(&a.out.join(artifacts::H_T), &h_t)?;
    data_io::write_features(&a.out.join(artifacts::H_S), &bundle.h_s)?;
    let (acc, base) = accuracies(&bundle, &h_t, &cfg)?;
    report_accuracy(&a.out, acc, base, out)
}

pub fn cmd_pipeline(a: &PipelineArgs, out: &mut dyn Write) -> Result<()> {
    let bundle = read_bundle(&a.bundle)?;
    let cfg = a.train.config();
    let r = pipeline::run_ablation(&bundle, &cfg, cfg.ablation)?;
    create_dir(&a.out)?;
    data_io::write_features(&a.out.join(artifacts::H_T), &r.h_t)?;
    data_io::write_features(&a.out.join(artifacts::H_S), &r.h_s)?;
    data_io::write_features(&a.out.join(artifacts::V_F), &r.v_f)?;
    data_io::write_features(&a.out.join(artifacts::H_V), &r.h_v)?;
    write_level(&a.out, &r.low, &r.low_report, LOW_NAMES)?;
    write_level(&a.out, &r.high, &r.high_report, HIGH_NAMES)?;
    report_accuracy(&a.out, r.accuracy, r.baseline_accuracy, out)
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let h_s = read_features(&a.hs)?;
    let labels_s = read_labels(&a.labels_s)?;
    let h_t = read_features(&a.ht)?;
    let labels_t = read_labels(&a.labels_t)?;
    if labels_s.len() != h_s.rows() {
        return Err(HiganError::BadSpec(format!(
            "{} source labels for {} source rows",
            labels_s.len(),
            h_s.rows()
        )));
    }
    let cfg = TrainConfig {
        classifier_max_iters: a.classifier_iters,
        ..TrainConfig::default()
    };
    let acc = evaluate_transfer(&h_s, &labels_s, &h_t, &labels_t, &cfg)?;
    emit(out, &format_accuracy(acc))
}
