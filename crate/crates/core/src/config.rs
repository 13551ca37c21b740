use std::fmt;
use std::str::FromStr;

use crate::error::HiganError;

/// Which of the two conditional GANs a value refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Frame features → video-clip features.
    Low,
    /// Video-clip features → image-frame features.
    High,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ablation {
    #[default]
    Full,
    /// Adversarial weights forced to zero.
    CoralOnly,
    /// CORAL weights forced to zero.
    AdversarialOnly,
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::Full => "full",
            Ablation::CoralOnly => "coral_only",
            Ablation::AdversarialOnly => "adversarial_only",
        })
    }
}

impl FromStr for Ablation {
    type Err = HiganError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Ablation::Full),
            "coral_only" => Ok(Ablation::CoralOnly),
            "adversarial_only" => Ok(Ablation::AdversarialOnly),
            other => Err(HiganError::BadSpec(format!("unknown ablation {other:?}"))),
        }
    }
}

/// Hidden-layer widths of the four networks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Architecture {
    /// Published widths: generators `·→1024→1024→1024→·` (low) and
    /// `·→1024→1024→2048→·` (high), discriminators `·→1280→640→1`.
    Published,
    /// Generators with three hidden layers of `w`, discriminators `·→w→w/2→1`.
    Uniform(usize),
    /// Published widths when the data has the published dimensions
    /// (frame 2048, clip 512, image-frame 2048), `Uniform(32)` otherwise.
    Auto,
}

impl Architecture {
    pub const AUTO_WIDTH: usize = 32;

    /// Replaces `Auto` with the concrete choice for these data dimensions.
    pub fn resolve(&self, d_f: usize, d_v: usize, d_h: usize) -> Architecture {
        match self {
            Architecture::Auto if (d_f, d_v, d_h) == (2048, 512, 2048) => Architecture::Published,
            Architecture::Auto => Architecture::Uniform(Self::AUTO_WIDTH),
            other => other.clone(),
        }
    }

    /// Full dimension chain of the generator for `level`.
    pub fn generator_dims(&self, level: Level, d_f: usize, d_v: usize, d_h: usize) -> Vec<usize> {
        let (input, output) = match level {
            Level::Low => (d_f, d_v),
            Level::High => (d_v, d_h),
        };
        let hidden = match (self.resolve(d_f, d_v, d_h), level) {
            (Architecture::Published, Level::Low) => vec![1024, 1024, 1024],
            (Architecture::Published, Level::High) => vec![1024, 1024, 2048],
            (Architecture::Uniform(w), _) => vec![w, w, w],
            (Architecture::Auto, _) => unreachable!("resolved above"),
        };
        std::iter::once(input)
            .chain(hidden)
            .chain(std::iter::once(output))
            .collect()
    }

    /// Full dimension chain of the discriminator for `level`; its input is the
    /// condition concatenated with the sample.
    pub fn discriminator_dims(&self, level: Level, d_f: usize, d_v: usize, d_h: usize) -> Vec<usize> {
        let input = match level {
            Level::Low => d_f + d_v,
            Level::High => d_v + d_h,
        };
        match self.resolve(d_f, d_v, d_h) {
            Architecture::Published => vec![input, 1280, 640, 1],
            Architecture::Uniform(w) => vec![input, w, (w / 2).max(1), 1],
            Architecture::Auto => unreachable!("resolved above"),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Published => f.write_str("published"),
            Architecture::Uniform(w) => write!(f, "{w}"),
            Architecture::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for Architecture {
    type Err = HiganError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "published" => Ok(Architecture::Published),
            "auto" => Ok(Architecture::Auto),
            w => match w.parse::<usize>() {
                Ok(w) if w >= 1 => Ok(Architecture::Uniform(w)),
                _ => Err(HiganError::BadSpec(format!(
                    "hidden width must be 'published', 'auto' or a positive integer, got {s:?}"
                ))),
            },
        }
    }
}

/// Every hyperparameter of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Adversarial weight, low level.
    pub lambda1: f64,
    /// CORAL weight, low level.
    pub lambda2: f64,
    /// Adversarial weight, high level.
    pub lambda3: f64,
    /// CORAL weight, high level.
    pub lambda4: f64,
    /// Multiplier on the Frobenius regularizer. `None` resolves to 1 for the
    /// published architecture and to `w/1024` for `Uniform(w)`, which keeps
    /// the per-entry pull `W/‖W‖_F` at the scale it has on 1024-wide layers.
    pub reg_weight: Option<f64>,
    pub lr_low: f64,
    pub lr_high: f64,
    pub batch_size: usize,
    /// Alternating D/G iterations per level.
    pub iterations: usize,
    pub seed: u64,
    pub ablation: Ablation,
    pub architecture: Architecture,
    pub classifier_max_iters: usize,
    pub classifier_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 100.0,
            lambda3: 1.0,
            lambda4: 100.0,
            reg_weight: None,
            lr_low: 2e-5,
            lr_high: 8e-6,
            batch_size: 64,
            iterations: 20_000,
            seed: 0,
            ablation: Ablation::Full,
            architecture: Architecture::Auto,
            classifier_max_iters: 2_000,
            classifier_tol: 1e-6,
        }
    }
}

impl TrainConfig {
    /// Settings calibrated for low-dimensional data on the `Uniform(32)`
    /// networks. CORAL at weight 100 swamps the adversarial term when `d` is
    /// a handful of columns, the regularizer at `w/1024` collapses the
    /// generators to constants once the other gradients shrink, and the
    /// high level needs a larger step to move its output mean within 20k
    /// iterations.
    pub fn compact() -> Self {
        Self {
            lambda2: 1.0,
            lambda4: 1.0,
            reg_weight: Some(3e-4),
            lr_high: 1e-4,
            ..Self::default()
        }
    }
}

/// Adversarial and CORAL weights actually applied at one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub adv: f64,
    pub coral: f64,
    pub reg: f64,
}

impl TrainConfig {
    /// Weights for `level` with the ablation switch applied.
    pub fn loss_weights(&self, level: Level) -> LossWeights {
        let (adv, coral) = match level {
            Level::Low => (self.lambda1, self.lambda2),
            Level::High => (self.lambda3, self.lambda4),
        };
        let reg = self.reg_weight.unwrap_or(1.0);
        match self.ablation {
            Ablation::Full => LossWeights { adv, coral, reg },
            Ablation::CoralOnly => LossWeights { adv: 0.0, coral, reg },
            Ablation::AdversarialOnly => LossWeights { adv, coral: 0.0, reg },
        }
    }

    /// Copy with the architecture and regularizer weight fixed for data of
    /// the given dimensions.
    pub fn resolved(&self, d_f: usize, d_v: usize, d_h: usize) -> TrainConfig {
        let architecture = self.architecture.resolve(d_f, d_v, d_h);
        let reg_weight = self.reg_weight.or(match architecture {
            Architecture::Uniform(w) => Some(w as f64 / 1024.0),
            _ => Some(1.0),
        });
        TrainConfig {
            architecture,
            reg_weight,
            ..self.clone()
        }
    }

    pub fn learning_rate(&self, level: Level) -> f64 {
        match level {
            Level::Low => self.lr_low,
            Level::High => self.lr_high,
        }
    }

    pub fn validate(&self) -> Result<(), HiganError> {
        let lambdas = [
            self.lambda1,
            self.lambda2,
            self.lambda3,
            self.lambda4,
            self.reg_weight.unwrap_or(1.0),
        ];
        if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(HiganError::BadSpec("loss weights must be finite and nonnegative".into()));
        }
        if !(self.lr_low > 0.0 && self.lr_high > 0.0 && self.lr_low.is_finite() && self.lr_high.is_finite()) {
            return Err(HiganError::BadSpec("learning rates must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(HiganError::BadSpec("batch size must be at least 2".into()));
        }
        if self.classifier_tol.is_nan() || self.classifier_tol < 0.0 {
            return Err(HiganError::BadSpec("classifier tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_settings() {
        let cfg = TrainConfig::default();
        assert_eq!((cfg.lambda1, cfg.lambda2, cfg.lambda3, cfg.lambda4), (1.0, 100.0, 1.0, 100.0));
        assert_eq!(cfg.lr_low, 0.00002);
        assert_eq!(cfg.lr_high, 0.000008);
        assert_eq!(cfg.batch_size, 64);
    }

    #[test]
    fn compact_only_changes_scale_sensitive_settings() {
        let c = TrainConfig::compact();
        let d = TrainConfig::default();
        assert_eq!((c.lambda1, c.lambda3), (d.lambda1, d.lambda3));
        assert_eq!((c.lambda2, c.lambda4), (1.0, 1.0));
        assert_eq!((c.lr_low, c.lr_high), (d.lr_low, 1e-4));
        assert_eq!(c.batch_size, d.batch_size);
        c.validate().unwrap();
    }

    #[test]
    fn ablation_zeroes_the_right_weights() {
        let mut cfg = TrainConfig {
            ablation: Ablation::CoralOnly,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.loss_weights(Level::Low), LossWeights { adv: 0.0, coral: 100.0, reg: 1.0 });
        assert_eq!(cfg.loss_weights(Level::High), LossWeights { adv: 0.0, coral: 100.0, reg: 1.0 });
        cfg.ablation = Ablation::AdversarialOnly;
        assert_eq!(cfg.loss_weights(Level::Low), LossWeights { adv: 1.0, coral: 0.0, reg: 1.0 });
        assert_eq!(cfg.loss_weights(Level::High), LossWeights { adv: 1.0, coral: 0.0, reg: 1.0 });
    }

    #[test]
    fn published_architecture_dims() {
        let a = Architecture::Auto;
        assert_eq!(a.generator_dims(Level::Low, 2048, 512, 2048), [2048, 1024, 1024, 1024, 512]);
        assert_eq!(a.generator_dims(Level::High, 2048, 512, 2048), [512, 1024, 1024, 2048, 2048]);
        assert_eq!(a.discriminator_dims(Level::Low, 2048, 512, 2048), [2560, 1280, 640, 1]);
        assert_eq!(a.discriminator_dims(Level::High, 2048, 512, 2048), [2560, 1280, 640, 1]);
        assert_eq!(a.generator_dims(Level::Low, 6, 4, 5), [6, 32, 32, 32, 4]);
        assert_eq!(a.discriminator_dims(Level::High, 6, 4, 5), [9, 32, 16, 1]);
    }

    #[test]
    fn resolution_picks_architecture_and_reg_weight() {
        let cfg = TrainConfig::default();
        let published = cfg.resolved(2048, 512, 2048);
        assert_eq!(published.architecture, Architecture::Published);
        assert_eq!(published.reg_weight, Some(1.0));
        let small = cfg.resolved(6, 4, 5);
        assert_eq!(small.architecture, Architecture::Uniform(32));
        assert_eq!(small.reg_weight, Some(0.03125));
        let pinned = TrainConfig { reg_weight: Some(0.5), ..cfg }.resolved(6, 4, 5);
        assert_eq!(pinned.reg_weight, Some(0.5));
    }

    #[test]
    fn parse_round_trip() {
        for s in ["full", "coral_only", "adversarial_only"] {
            assert_eq!(s.parse::<Ablation>().unwrap().to_string(), s);
        }
        assert!("both".parse::<Ablation>().is_err());
        assert_eq!("published".parse::<Architecture>().unwrap(), Architecture::Published);
        assert_eq!("48".parse::<Architecture>().unwrap(), Architecture::Uniform(48));
        assert!("0".parse::<Architecture>().is_err());
    }
}
