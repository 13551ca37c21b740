//! Full pipeline and both ablations on the default synthetic bundle.
//!
//! `cargo run --release --example synthetic_transfer -- [iterations] [seed] [synth_seed]`

use std::time::Instant;

use higan::data_io::{synthesize, SynthSpec};
use higan::pipeline::run_ablation;
use higan::{Ablation, TrainConfig};

fn main() -> higan::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations = args.next().and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    let synth_seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(SynthSpec::default().seed);
    let bundle = synthesize(&SynthSpec {
        seed: synth_seed,
        ..SynthSpec::default()
    })?;
    let cfg = TrainConfig {
        iterations,
        seed,
        ..TrainConfig::compact()
    };
    println!("clips={} videos={}", bundle.clip_count(), bundle.clips.video_count());
    for variant in [Ablation::Full, Ablation::AdversarialOnly, Ablation::CoralOnly] {
        let start = Instant::now();
        let r = run_ablation(&bundle, &cfg, variant)?;
        let last = |rep: &higan::trainer::TrainReport| rep.records.last().copied();
        println!(
            "{variant:>16}: accuracy={:.4} baseline={:.4} low={:?} high={:?} ({:.1}s)",
            r.accuracy.unwrap_or(f64::NAN),
            r.baseline_accuracy.unwrap_or(f64::NAN),
            last(&r.low_report).map(|x| (x.d_loss, x.g_adv, x.coral, x.reg)),
            last(&r.high_report).map(|x| (x.d_loss, x.g_adv, x.coral, x.reg)),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
