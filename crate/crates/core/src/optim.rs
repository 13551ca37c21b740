//! Adam with bias correction, one state per network.

use crate::error::{HiganError, Result};
use crate::mlp::{MlpNetwork, NetworkGrads};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    // flat moments, layer by layer: weights then bias
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One Adam update of `net` from `grads`. A fresh state sizes its moments
    /// on first use.
    pub fn step(&mut self, net: &mut MlpNetwork, grads: &NetworkGrads) -> Result<()> {
        let n_params = net.parameter_count();
        if grads.layers.len() != net.layers().len() {
            return Err(HiganError::ShapeMismatch {
                op: "adam_step",
                left: (net.layers().len(), n_params),
                right: (grads.layers.len(), 0),
            });
        }
        for (layer, g) in net.layers().iter().zip(&grads.layers) {
            if layer.weights.shape() != g.weights.shape() || layer.bias.len() != g.bias.len() {
                return Err(HiganError::ShapeMismatch {
                    op: "adam_step",
                    left: layer.weights.shape(),
                    right: g.weights.shape(),
                });
            }
        }
        if self.m.is_empty() {
            self.m = vec![0.0; n_params];
            self.v = vec![0.0; n_params];
        } else if self.m.len() != n_params {
            return Err(HiganError::ShapeMismatch {
                op: "adam_step",
                left: (self.m.len(), 1),
                right: (n_params, 1),
            });
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);

        let mut k = 0;
        let mut update = |param: &mut f64, g: f64| {
            let m = &mut self.m[k];
            let v = &mut self.v[k];
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *param -= lr * m_hat / (v_hat.sqrt() + eps);
            k += 1;
        };
        for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
            for (p, &gv) in layer.weights.as_mut_slice().iter_mut().zip(g.weights.as_slice()) {
                update(p, gv);
            }
            for (p, &gv) in layer.bias.iter_mut().zip(&g.bias) {
                update(p, gv);
            }
        }
        Ok(())
    }
}
