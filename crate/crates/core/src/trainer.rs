//! Alternating least-squares conditional-GAN training for one level.
//!
//! The discriminator sees `condition ‖ sample` rows. Each iteration draws one
//! paired minibatch, takes one discriminator step with the generator frozen,
//! then one generator step with the discriminator frozen.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Level, LossWeights, TrainConfig};
use crate::error::{HiganError, Result};
use crate::linalg::Matrix;
use crate::losses::{coral_loss, lsgan_d_loss, lsgan_g_loss, reg_loss};
use crate::mlp::{chain_specs, MlpNetwork};
use crate::optim::AdamState;

/// Mixes a base seed with a role tag (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator/discriminator pair of one level plus its loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GanLevel {
    pub generator: MlpNetwork,
    pub discriminator: MlpNetwork,
    pub level: Level,
    pub weights: LossWeights,
}

impl GanLevel {
    pub fn new(
        generator: MlpNetwork,
        discriminator: MlpNetwork,
        level: Level,
        weights: LossWeights,
    ) -> Result<Self> {
        let expected = generator.input_dim() + generator.output_dim();
        if discriminator.input_dim() != expected || discriminator.output_dim() != 1 {
            return Err(HiganError::BadSpec(format!(
                "{} level: discriminator is {}→{}, expected {}→1",
                level.name(),
                discriminator.input_dim(),
                discriminator.output_dim(),
                expected
            )));
        }
        if weights.adv < 0.0 || weights.coral < 0.0 || weights.reg < 0.0 {
            return Err(HiganError::BadSpec("loss weights must be nonnegative".into()));
        }
        Ok(Self {
            generator,
            discriminator,
            level,
            weights,
        })
    }

    /// Freshly initialized networks with the given dimension chains, weights
    /// taken from `cfg`.
    pub fn init(level: Level, gen_dims: &[usize], disc_dims: &[usize], cfg: &TrainConfig) -> Result<Self> {
        let tag = match level {
            Level::Low => 0,
            Level::High => 2,
        };
        let generator = MlpNetwork::init(&chain_specs(gen_dims), derive_seed(cfg.seed, tag))?;
        let discriminator = MlpNetwork::init(&chain_specs(disc_dims), derive_seed(cfg.seed, tag + 1))?;
        Self::new(generator, discriminator, level, cfg.loss_weights(level))
    }

    pub fn condition_dim(&self) -> usize {
        self.generator.input_dim()
    }

    pub fn sample_dim(&self) -> usize {
        self.generator.output_dim()
    }

    /// Deterministic generator forward pass.
    pub fn generate(&self, conditions: &Matrix) -> Result<Matrix> {
        if conditions.cols() != self.condition_dim() {
            return Err(HiganError::ShapeMismatch {
                op: "generate",
                left: conditions.shape(),
                right: (conditions.rows(), self.condition_dim()),
            });
        }
        self.generator.predict(conditions)
    }
}

/// Loss values of one training iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Unweighted least-squares discriminator loss.
    pub d_loss: f64,
    /// Unweighted least-squares generator loss.
    pub g_adv: f64,
    pub coral: f64,
    /// Generator regularizer.
    pub reg: f64,
    /// `λ_adv·g_adv + λ_coral·coral + λ_reg·reg`.
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub records: Vec<IterationRecord>,
}

impl TrainReport {
    pub const CSV_HEADER: &'static str = "iter,d_loss,g_adv,coral,reg,total";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration, r.d_loss, r.g_adv, r.coral, r.reg, r.total
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| HiganError::io(path, e))
    }
}

/// Shuffled minibatches without replacement; reshuffles each epoch and drops
/// a trailing batch smaller than 2 rows.
#[derive(Debug, Clone)]
pub struct EpochSampler {
    order: Vec<usize>,
    batch: usize,
    pos: usize,
    rng: ChaCha8Rng,
}

impl EpochSampler {
    pub fn new(n: usize, batch: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(HiganError::EmptyDataset { rows: n });
        }
        let mut sampler = Self {
            order: (0..n).collect(),
            batch: batch.clamp(2, n),
            pos: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        sampler.order.shuffle(&mut sampler.rng);
        Ok(sampler)
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.order.len() - self.pos < 2 {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch).min(self.order.len());
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        batch
    }
}

/// Losses observed during one generator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorStep {
    pub g_adv: f64,
    pub coral: f64,
    pub reg: f64,
    pub total: f64,
}

/// A level together with one Adam state per network.
#[derive(Debug, Clone)]
pub struct GanTrainer {
    level: GanLevel,
    g_opt: AdamState,
    d_opt: AdamState,
}

impl GanTrainer {
    pub fn new(level: GanLevel, lr: f64) -> Self {
        Self {
            level,
            g_opt: AdamState::new(lr),
            d_opt: AdamState::new(lr),
        }
    }

    pub fn level(&self) -> &GanLevel {
        &self.level
    }

    pub fn into_level(self) -> GanLevel {
        self.level
    }

    fn check_batch(&self, conditions: &Matrix, reals: &Matrix) -> Result<()> {
        if conditions.rows() != reals.rows()
            || conditions.cols() != self.level.condition_dim()
            || reals.cols() != self.level.sample_dim()
        {
            return Err(HiganError::ShapeMismatch {
                op: "train batch",
                left: conditions.shape(),
                right: reals.shape(),
            });
        }
        Ok(())
    }

    /// Minimizes the discriminator loss plus the discriminator's regularizer
    /// with the generator frozen. Returns the unweighted discriminator loss.
    pub fn discriminator_step(&mut self, conditions: &Matrix, reals: &Matrix) -> Result<f64> {
        self.check_batch(conditions, reals)?;
        let disc = &self.level.discriminator;
        let fakes = self.level.generator.predict(conditions)?;
        let (d_real, real_trace) = disc.forward(&conditions.hcat(reals)?)?;
        let (d_fake, fake_trace) = disc.forward(&conditions.hcat(&fakes)?)?;
        let loss = lsgan_d_loss(&d_real, &d_fake)?;

        let (mut grads, _) = disc.backward(&real_trace, &loss.grads[0])?;
        let (fake_grads, _) = disc.backward(&fake_trace, &loss.grads[1])?;
        grads.add(&fake_grads)?;
        grads.add_weight_terms(&reg_loss(&[disc]).grads, self.level.weights.reg)?;
        if !loss.value.is_finite() || !grads.is_finite() {
            return Ok(f64::NAN);
        }
        self.d_opt.step(&mut self.level.discriminator, &grads)?;
        Ok(loss.value)
    }

    /// Minimizes `λ_adv·adv + λ_coral·coral + reg(G)` with the discriminator
    /// frozen.
    pub fn generator_step(&mut self, conditions: &Matrix, reals: &Matrix) -> Result<GeneratorStep> {
        self.check_batch(conditions, reals)?;
        let w = self.level.weights;
        let generator = &self.level.generator;
        let disc = &self.level.discriminator;

        let (fakes, g_trace) = generator.forward(conditions)?;
        let (d_fake, d_trace) = disc.forward(&conditions.hcat(&fakes)?)?;
        let adv = lsgan_g_loss(&d_fake)?;
        let (_, d_input_grad) = disc.backward(&d_trace, &adv.grads[0])?;
        let adv_sample_grad = d_input_grad.column_slice(conditions.cols(), d_input_grad.cols());

        let coral = coral_loss(reals, &fakes)?;
        let mut d_fakes = adv_sample_grad.scale(w.adv);
        d_fakes.add_scaled(&coral.grads[1], w.coral)?;

        let (mut grads, _) = generator.backward(&g_trace, &d_fakes)?;
        let reg = reg_loss(&[generator]);
        grads.add_weight_terms(&reg.grads, w.reg)?;

        let total = w.adv * adv.value + w.coral * coral.value + w.reg * reg.value;
        let step = GeneratorStep {
            g_adv: adv.value,
            coral: coral.value,
            reg: reg.value,
            total,
        };
        if total.is_finite() && grads.is_finite() {
            self.g_opt.step(&mut self.level.generator, &grads)?;
        }
        Ok(step)
    }
}

/// Runs `cfg.iterations` alternating D/G steps on row-aligned
/// `(conditions, reals)` pairs.
pub fn train_gan(
    level: GanLevel,
    conditions: &Matrix,
    reals: &Matrix,
    cfg: &TrainConfig,
) -> Result<(GanLevel, TrainReport)> {
    if conditions.rows() != reals.rows() {
        return Err(HiganError::ShapeMismatch {
            op: "train_gan",
            left: conditions.shape(),
            right: reals.shape(),
        });
    }
    if conditions.cols() != level.condition_dim() || reals.cols() != level.sample_dim() {
        return Err(HiganError::ShapeMismatch {
            op: "train_gan",
            left: (level.condition_dim(), level.sample_dim()),
            right: (conditions.cols(), reals.cols()),
        });
    }
    let mut report = TrainReport::default();
    if cfg.iterations == 0 {
        return Ok((level, report));
    }
    let sampler_tag = match level.level {
        Level::Low => 10,
        Level::High => 11,
    };
    let mut sampler = EpochSampler::new(conditions.rows(), cfg.batch_size, derive_seed(cfg.seed, sampler_tag))?;
    let lr = cfg.learning_rate(level.level);
    let mut trainer = GanTrainer::new(level, lr);

    for iteration in 0..cfg.iterations {
        let idx = sampler.next_batch();
        let cond = conditions.select_rows(&idx);
        let real = reals.select_rows(&idx);
        let d_loss = trainer.discriminator_step(&cond, &real)?;
        if !d_loss.is_finite() {
            return Err(HiganError::NonFiniteLoss {
                iteration,
                what: "discriminator loss",
            });
        }
        let g = trainer.generator_step(&cond, &real)?;
        for (v, what) in [
            (g.g_adv, "generator adversarial loss"),
            (g.coral, "coral loss"),
            (g.reg, "regularizer"),
            (g.total, "generator objective"),
        ] {
            if !v.is_finite() {
                return Err(HiganError::NonFiniteLoss { iteration, what });
            }
        }
        report.records.push(IterationRecord {
            iteration,
            d_loss,
            g_adv: g.g_adv,
            coral: g.coral,
            reg: g.reg,
            total: g.total,
        });
    }
    Ok((trainer.into_level(), report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_level(cfg: &TrainConfig) -> GanLevel {
        GanLevel::init(Level::Low, &[2, 8, 2], &[4, 8, 1], cfg).unwrap()
    }

    fn toy_data(n: usize) -> (Matrix, Matrix) {
        let c = Matrix::from_fn(n, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let r = Matrix::from_fn(n, 2, |i, j| c.get(i, 0) * (j as f64 + 1.0) - c.get(i, 1));
        (c, r)
    }

    #[test]
    fn sampler_covers_each_epoch_without_replacement() {
        let mut s = EpochSampler::new(10, 4, 1).unwrap();
        let mut seen: Vec<usize> = Vec::new();
        seen.extend(s.next_batch());
        seen.extend(s.next_batch());
        seen.extend(s.next_batch());
        seen.sort();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn sampler_drops_singleton_tail() {
        let mut s = EpochSampler::new(9, 4, 1).unwrap();
        let sizes: Vec<usize> = (0..6).map(|_| s.next_batch().len()).collect();
        assert_eq!(sizes, [4, 4, 4, 4, 4, 4]);
        assert!(matches!(EpochSampler::new(1, 4, 1), Err(HiganError::EmptyDataset { rows: 1 })));
    }

    #[test]
    fn zero_iterations_is_identity() {
        let cfg = TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        };
        let level = toy_level(&cfg);
        let (c, r) = toy_data(20);
        let (out, report) = train_gan(level.clone(), &c, &r, &cfg).unwrap();
        assert_eq!(out, level);
        assert!(report.records.is_empty());
    }

    #[test]
    fn steps_leave_frozen_network_alone() {
        let cfg = TrainConfig::default();
        let mut trainer = GanTrainer::new(toy_level(&cfg), 1e-2);
        let (c, r) = toy_data(8);
        let g_before = trainer.level().generator.clone();
        let d_before = trainer.level().discriminator.clone();
        trainer.discriminator_step(&c, &r).unwrap();
        assert_eq!(trainer.level().generator, g_before);
        assert_ne!(trainer.level().discriminator, d_before);

        let d_mid = trainer.level().discriminator.clone();
        trainer.generator_step(&c, &r).unwrap();
        assert_eq!(trainer.level().discriminator, d_mid);
        assert_ne!(trainer.level().generator, g_before);
    }

    #[test]
    fn report_is_ordered_and_csv_shaped() {
        let cfg = TrainConfig {
            iterations: 5,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let (c, r) = toy_data(10);
        let (_, report) = train_gan(toy_level(&cfg), &c, &r, &cfg).unwrap();
        let iters: Vec<_> = report.records.iter().map(|r| r.iteration).collect();
        assert_eq!(iters, [0, 1, 2, 3, 4]);
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("iter,d_loss,g_adv,coral,reg,total"));
        assert_eq!(lines.count(), 5);
    }

    #[test]
    fn diverging_run_aborts_with_iteration() {
        let cfg = TrainConfig {
            iterations: 200,
            batch_size: 4,
            lr_low: 1e150,
            ..TrainConfig::default()
        };
        let (c, r) = toy_data(10);
        let err = train_gan(toy_level(&cfg), &c, &r, &cfg).unwrap_err();
        assert!(matches!(err, HiganError::NonFiniteLoss { .. }), "{err:?}");
    }

    #[test]
    fn mismatched_discriminator_rejected() {
        let cfg = TrainConfig::default();
        assert!(matches!(
            GanLevel::init(Level::Low, &[2, 8, 2], &[3, 8, 1], &cfg),
            Err(HiganError::BadSpec(_))
        ));
    }

    #[test]
    fn generate_checks_width() {
        let level = toy_level(&TrainConfig::default());
        assert!(matches!(
            level.generate(&Matrix::zeros(3, 5)),
            Err(HiganError::ShapeMismatch { .. })
        ));
    }
}
