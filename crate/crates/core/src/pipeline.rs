//! The staged adaptation: frame→clip GAN, clip→image-frame GAN, clip
//! averaging and transfer evaluation.
//!
//! The high-level GAN is trained on generated clip features (`V_f = G_l(F)`)
//! paired with real image-frame features, but at inference it is applied to
//! the real clip features `V`. The two inputs only agree as far as the
//! low-level generator has matched the clip distribution.

use crate::classifier::SoftmaxClassifier;
use crate::config::{Ablation, Level, TrainConfig};
use crate::data_io::{ClipIndex, DomainBundle};
use crate::error::{HiganError, Result};
use crate::linalg::Matrix;
use crate::trainer::{train_gan, GanLevel, TrainReport};

#[derive(Debug, Clone)]
pub struct PipelineResult {
    /// Target video features, one row per video.
    pub h_t: Matrix,
    pub h_s: Matrix,
    /// Generated clip features `G_l(F)`.
    pub v_f: Matrix,
    /// Projected clip features `G_h(V)`.
    pub h_v: Matrix,
    pub low: GanLevel,
    pub high: GanLevel,
    pub low_report: TrainReport,
    pub high_report: TrainReport,
    /// Transfer accuracy on `h_t`, when the bundle carries target labels.
    pub accuracy: Option<f64>,
    /// Same classifier applied to per-video means of the real frame features.
    pub baseline_accuracy: Option<f64>,
}

/// Row `j` is the mean of the rows of `h_v` owned by video `j`, summed in
/// ascending clip order.
pub fn average_clips(h_v: &Matrix, idx: &ClipIndex) -> Result<Matrix> {
    if idx.clip_count() != h_v.rows() {
        return Err(HiganError::InvalidClipIndex(format!(
            "index covers {} clips, matrix has {} rows",
            idx.clip_count(),
            h_v.rows()
        )));
    }
    let d = h_v.cols();
    let mut out = Matrix::zeros(idx.video_count(), d);
    for video in 0..idx.video_count() {
        let clips = idx.clips_of(video);
        let mut acc = vec![0.0; d];
        for &c in clips {
            for (a, v) in acc.iter_mut().zip(h_v.row(c)) {
                *a += v;
            }
        }
        let n = clips.len() as f64;
        for (j, a) in acc.into_iter().enumerate() {
            out.set(video, j, a / n);
        }
    }
    Ok(out)
}

/// Trains a softmax classifier on the source side and returns its accuracy
/// on the target side.
pub fn evaluate_transfer(
    h_s: &Matrix,
    labels_s: &[usize],
    h_t: &Matrix,
    labels_t: &[usize],
    cfg: &TrainConfig,
) -> Result<f64> {
    if h_s.cols() != h_t.cols() {
        return Err(HiganError::ShapeMismatch {
            op: "evaluate_transfer (source dim vs target dim)",
            left: h_s.shape(),
            right: h_t.shape(),
        });
    }
    if labels_t.len() != h_t.rows() {
        return Err(HiganError::BadSpec(format!(
            "{} target labels for {} target rows",
            labels_t.len(),
            h_t.rows()
        )));
    }
    let classes = labels_s.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; classes];
    labels_s.iter().for_each(|&l| present[l] = true);
    if let Some(&class) = labels_t.iter().find(|&&l| l >= classes || !present[l]) {
        return Err(HiganError::ClassMismatch { class });
    }
    if h_t.rows() == 0 {
        return Ok(0.0);
    }
    let clf = SoftmaxClassifier::fit(h_s, labels_s, cfg.classifier_max_iters, cfg.classifier_tol)?;
    let predicted = clf.predict(h_t)?;
    let correct = predicted.iter().zip(labels_t).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / labels_t.len() as f64)
}

/// Freshly initialized low- and high-level GANs for `bundle` under `cfg`.
pub fn initial_levels(bundle: &DomainBundle, cfg: &TrainConfig) -> Result<(GanLevel, GanLevel)> {
    let (d_f, d_v, d_h) = (bundle.f.cols(), bundle.v.cols(), bundle.h_f.cols());
    let arch = &cfg.architecture;
    let low = GanLevel::init(
        Level::Low,
        &arch.generator_dims(Level::Low, d_f, d_v, d_h),
        &arch.discriminator_dims(Level::Low, d_f, d_v, d_h),
        cfg,
    )?;
    let high = GanLevel::init(
        Level::High,
        &arch.generator_dims(Level::High, d_f, d_v, d_h),
        &arch.discriminator_dims(Level::High, d_f, d_v, d_h),
        cfg,
    )?;
    Ok((low, high))
}

/// `cfg` with `Auto` architecture and regularizer weight fixed for the
/// bundle's dimensions.
pub fn resolve_for(bundle: &DomainBundle, cfg: &TrainConfig) -> TrainConfig {
    cfg.resolved(bundle.f.cols(), bundle.v.cols(), bundle.h_f.cols())
}

fn expect_shape(m: &Matrix, shape: (usize, usize), stage: &'static str) -> Result<()> {
    if m.shape() != shape {
        return Err(HiganError::ShapeMismatch {
            op: stage,
            left: m.shape(),
            right: shape,
        });
    }
    Ok(())
}

/// Runs every stage with freshly initialized networks.
pub fn run_pipeline(bundle: &DomainBundle, cfg: &TrainConfig) -> Result<PipelineResult> {
    let cfg = &resolve_for(bundle, cfg);
    let (low, high) = initial_levels(bundle, cfg)?;
    run_pipeline_from(bundle, cfg, low, high)
}

/// Trains the low level on `(F, V)` and returns it with its report and the
/// generated clip features `V_f = G_l(F)`.
pub fn low_stage(bundle: &DomainBundle, cfg: &TrainConfig, mut low: GanLevel) -> Result<(GanLevel, TrainReport, Matrix)> {
    let cfg = &resolve_for(bundle, cfg);
    cfg.validate()?;
    bundle.validate()?;
    low.weights = cfg.loss_weights(Level::Low);
    let (low, report) = train_gan(low, &bundle.f, &bundle.v, cfg)?;
    let v_f = low.generate(&bundle.f)?;
    expect_shape(&v_f, (bundle.clip_count(), bundle.v.cols()), "generated clip features")?;
    Ok((low, report, v_f))
}

/// Trains the high level on `(V_f, H_f)`, projects the real clip features
/// and averages them per video. Returns the level, its report, `H_v` and `H_t`.
pub fn high_stage(
    bundle: &DomainBundle,
    cfg: &TrainConfig,
    mut high: GanLevel,
    v_f: &Matrix,
) -> Result<(GanLevel, TrainReport, Matrix, Matrix)> {
    let cfg = &resolve_for(bundle, cfg);
    cfg.validate()?;
    bundle.validate()?;
    high.weights = cfg.loss_weights(Level::High);
    let (high, report) = train_gan(high, v_f, &bundle.h_f, cfg)?;
    let h_v = high.generate(&bundle.v)?;
    expect_shape(&h_v, (bundle.clip_count(), bundle.h_f.cols()), "projected clip features")?;
    let h_t = average_clips(&h_v, &bundle.clips)?;
    expect_shape(&h_t, (bundle.clips.video_count(), bundle.h_f.cols()), "target video features")?;
    Ok((high, report, h_v, h_t))
}

/// Runs every stage starting from the given networks. The loss weights are
/// re-derived from `cfg` so the ablation switch always applies.
pub fn run_pipeline_from(
    bundle: &DomainBundle,
    cfg: &TrainConfig,
    low: GanLevel,
    high: GanLevel,
) -> Result<PipelineResult> {
    let cfg = &resolve_for(bundle, cfg);
    let (low, low_report, v_f) = low_stage(bundle, cfg, low)?;
    let (high, high_report, h_v, h_t) = high_stage(bundle, cfg, high, &v_f)?;

    let (accuracy, baseline_accuracy) = match &bundle.labels_t {
        Some(labels_t) => {
            let acc = evaluate_transfer(&bundle.h_s, &bundle.labels_s, &h_t, labels_t, cfg)?;
            let frame_means = average_clips(&bundle.h_f, &bundle.clips)?;
            let base = evaluate_transfer(&bundle.h_s, &bundle.labels_s, &frame_means, labels_t, cfg)?;
            (Some(acc), Some(base))
        }
        None => (None, None),
    };

    Ok(PipelineResult {
        h_t,
        h_s: bundle.h_s.clone(),
        v_f,
        h_v,
        low,
        high,
        low_report,
        high_report,
        accuracy,
        baseline_accuracy,
    })
}

/// [`run_pipeline`] with `cfg.ablation` overridden by `variant`.
pub fn run_ablation(bundle: &DomainBundle, cfg: &TrainConfig, variant: Ablation) -> Result<PipelineResult> {
    let cfg = TrainConfig {
        ablation: variant,
        ..cfg.clone()
    };
    run_pipeline(bundle, &cfg)
}
