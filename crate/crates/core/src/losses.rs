//! Scalar training objectives with their analytic gradients.

use crate::config::{Level, TrainConfig};
use crate::error::{HiganError, Result};
use crate::linalg::Matrix;
use crate::mlp::MlpNetwork;

/// A loss value with gradients with respect to each tensor argument, in
/// argument order.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grads: Vec<Matrix>,
}

impl LossValue {
    fn scaled(&self, s: f64) -> impl Iterator<Item = Matrix> + '_ {
        self.grads.iter().map(move |g| g.scale(s))
    }
}

/// CORAL distance `(1/(4d²))·‖E_real − E_generated‖²_F`.
///
/// Gradients are `[d/d real, d/d generated]`.
pub fn coral_loss(real: &Matrix, generated: &Matrix) -> Result<LossValue> {
    if real.cols() != generated.cols() {
        return Err(HiganError::ShapeMismatch {
            op: "coral_loss",
            left: real.shape(),
            right: generated.shape(),
        });
    }
    let d = real.cols() as f64;
    let cov_real = real.covariance()?;
    let cov_gen = generated.covariance()?;
    let diff = cov_real.sub(&cov_gen)?;
    let norm = diff.frobenius_norm();
    let c = 1.0 / (4.0 * d * d);
    let value = c * norm * norm;

    // dL/dE_real = 2c·diff; dE/dX applied to a symmetric G is (2/(n-1))·X̃·G
    let grad_of = |x: &Matrix, sign: f64| -> Result<Matrix> {
        let n = x.rows() as f64;
        let g = diff.scale(sign * 2.0 * c * 2.0 / (n - 1.0));
        x.centered().matmul(&g)
    };
    Ok(LossValue {
        value,
        grads: vec![grad_of(real, 1.0)?, grad_of(generated, -1.0)?],
    })
}

fn check_column(m: &Matrix, op: &'static str) -> Result<()> {
    if m.rows() == 0 {
        return Err(HiganError::EmptyBatch(op));
    }
    if m.cols() != 1 {
        return Err(HiganError::ShapeMismatch {
            op,
            left: m.shape(),
            right: (m.rows(), 1),
        });
    }
    Ok(())
}

/// Least-squares discriminator loss `½·mean((d_real − 1)²) + ½·mean(d_fake²)`.
///
/// Gradients are `[d/d d_real, d/d d_fake]`.
pub fn lsgan_d_loss(d_real: &Matrix, d_fake: &Matrix) -> Result<LossValue> {
    check_column(d_real, "lsgan_d_loss")?;
    check_column(d_fake, "lsgan_d_loss")?;
    let nr = d_real.rows() as f64;
    let nf = d_fake.rows() as f64;
    let real_term: f64 = d_real.as_slice().iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / nr;
    let fake_term: f64 = d_fake.as_slice().iter().map(|v| v * v).sum::<f64>() / nf;
    Ok(LossValue {
        value: 0.5 * real_term + 0.5 * fake_term,
        grads: vec![d_real.map(|v| (v - 1.0) / nr), d_fake.map(|v| v / nf)],
    })
}

/// Least-squares generator loss `½·mean((d_fake − 1)²)`.
pub fn lsgan_g_loss(d_fake: &Matrix) -> Result<LossValue> {
    check_column(d_fake, "lsgan_g_loss")?;
    let n = d_fake.rows() as f64;
    let value = 0.5 * d_fake.as_slice().iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / n;
    Ok(LossValue {
        value,
        grads: vec![d_fake.map(|v| (v - 1.0) / n)],
    })
}

/// Sum of unsquared Frobenius norms of every weight matrix (biases excluded).
///
/// Gradients are one matrix per layer, networks in order; `W/‖W‖_F`, or zero
/// when `W = 0`.
pub fn reg_loss(nets: &[&MlpNetwork]) -> LossValue {
    let mut value = 0.0;
    let mut grads = Vec::new();
    for net in nets {
        for layer in net.layers() {
            let norm = layer.weights.frobenius_norm();
            value += norm;
            grads.push(if norm > 0.0 {
                layer.weights.scale(1.0 / norm)
            } else {
                Matrix::zeros(layer.weights.rows(), layer.weights.cols())
            });
        }
    }
    LossValue { value, grads }
}

/// Weighted generator objective of one level:
/// `λ_adv·adv + λ_coral·coral + λ_reg·reg`, with the ablation switch in `cfg`
/// applied and `λ_reg` taken as 1 when `cfg` leaves it unresolved.
/// Gradients are the inputs' gradients scaled by their weights and
/// concatenated in the order adv, coral, reg.
pub fn combined_objective(
    level: Level,
    adv: &LossValue,
    coral: &LossValue,
    reg: &LossValue,
    cfg: &TrainConfig,
) -> LossValue {
    let w = cfg.loss_weights(level);
    let value = w.adv * adv.value + w.coral * coral.value + w.reg * reg.value;
    let grads = adv
        .scaled(w.adv)
        .chain(coral.scaled(w.coral))
        .chain(reg.scaled(w.reg))
        .collect();
    LossValue { value, grads }
}
