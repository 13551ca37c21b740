//! Fully connected feed-forward networks with hand-written backprop.
//!
//! Layers compute `Z = X·Wᵀ + b` followed by an activation. Weights are stored
//! `out_dim × in_dim` so that one row of `W` belongs to one output unit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{HiganError, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative; the rectifier's derivative at exactly 0 is taken as 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "linear" => Some(Activation::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }
}

/// Specs for a chain `dims[0] → dims[1] → … → dims[last]`: rectifier on every
/// hidden layer, linear output layer.
pub fn chain_specs(dims: &[usize]) -> Vec<LayerSpec> {
    let n = dims.len().saturating_sub(1);
    dims.windows(2)
        .enumerate()
        .map(|(i, w)| {
            let act = if i + 1 == n {
                Activation::Linear
            } else {
                Activation::Relu
            };
            LayerSpec::new(w[0], w[1], act)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        LayerSpec::new(self.weights.cols(), self.weights.rows(), self.activation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layers: Vec<Layer>,
    seed: u64,
}

/// Per-layer inputs and pre-activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    inputs: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::rows)
    }

    /// Pre-activation matrices, one per layer.
    pub fn pre_activations(&self) -> &[Matrix] {
        &self.pre_activations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients for every parameter of a network, layer by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads {
    pub layers: Vec<LayerGrad>,
}

impl NetworkGrads {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    /// Adds `alpha · w` to each layer's weight gradient.
    pub fn add_weight_terms(&mut self, weight_grads: &[Matrix], alpha: f64) -> Result<()> {
        if weight_grads.len() != self.layers.len() {
            return Err(HiganError::TraceMismatch(format!(
                "{} weight terms for {} layers",
                weight_grads.len(),
                self.layers.len()
            )));
        }
        for (l, g) in self.layers.iter_mut().zip(weight_grads) {
            l.weights.add_scaled(g, alpha)?;
        }
        Ok(())
    }

    pub fn add(&mut self, other: &NetworkGrads) -> Result<()> {
        if other.layers.len() != self.layers.len() {
            return Err(HiganError::TraceMismatch("layer count differs".into()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.add_scaled(&b.weights, 1.0)?;
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

fn check_chain(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(HiganError::BadSpec("network needs at least one layer".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(HiganError::BadSpec(format!("layer {i} has a zero dimension")));
        }
    }
    for (i, w) in specs.windows(2).enumerate() {
        if w[0].out_dim != w[1].in_dim {
            return Err(HiganError::BadSpec(format!(
                "layer {i} outputs {} but layer {} expects {}",
                w[0].out_dim,
                i + 1,
                w[1].in_dim
            )));
        }
    }
    Ok(())
}

impl MlpNetwork {
    /// He-scaled Gaussian weights, `N(0, 2/in_dim)`, zero biases.
    pub fn init(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        check_chain(specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|s| {
                let normal = Normal::new(0.0, (2.0 / s.in_dim as f64).sqrt())
                    .expect("positive std");
                let weights =
                    Matrix::from_fn(s.out_dim, s.in_dim, |_, _| normal.sample(&mut rng));
                Layer {
                    weights,
                    bias: vec![0.0; s.out_dim],
                    activation: s.activation,
                }
            })
            .collect();
        Ok(Self { layers, seed })
    }

    /// All-zero parameters; used to build degenerate reference networks.
    pub fn zeros(specs: &[LayerSpec]) -> Result<Self> {
        check_chain(specs)?;
        let layers = specs
            .iter()
            .map(|s| Layer {
                weights: Matrix::zeros(s.out_dim, s.in_dim),
                bias: vec![0.0; s.out_dim],
                activation: s.activation,
            })
            .collect();
        Ok(Self { layers, seed: 0 })
    }

    /// Assembles a network from explicit layers.
    pub fn from_layers(layers: Vec<Layer>, seed: u64) -> Result<Self> {
        let specs: Vec<_> = layers.iter().map(Layer::spec).collect();
        check_chain(&specs)?;
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.rows() {
                return Err(HiganError::BadSpec(format!(
                    "layer {i}: bias length {} but {} outputs",
                    l.bias.len(),
                    l.weights.rows()
                )));
            }
        }
        Ok(Self { layers, seed })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.rows()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardTrace)> {
        if x.cols() != self.input_dim() {
            return Err(HiganError::ShapeMismatch {
                op: "forward",
                left: x.shape(),
                right: (self.input_dim(), self.output_dim()),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &self.layers {
            let mut z = current.matmul_t(&layer.weights)?;
            let out_dim = layer.bias.len();
            for (k, v) in z.as_mut_slice().iter_mut().enumerate() {
                *v += layer.bias[k % out_dim];
            }
            let a = z.map(|v| layer.activation.apply(v));
            inputs.push(current);
            pre_activations.push(z);
            current = a;
        }
        Ok((
            current,
            ForwardTrace {
                inputs,
                pre_activations,
            },
        ))
    }

    /// Forward pass without keeping the trace.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.forward(x).map(|(y, _)| y)
    }

    /// Backpropagates `dL/dY` through the trace of a matching forward call.
    pub fn backward(&self, trace: &ForwardTrace, d_out: &Matrix) -> Result<(NetworkGrads, Matrix)> {
        if trace.inputs.len() != self.layers.len() {
            return Err(HiganError::TraceMismatch(format!(
                "trace has {} layers, network has {}",
                trace.inputs.len(),
                self.layers.len()
            )));
        }
        for (i, (layer, z)) in self.layers.iter().zip(&trace.pre_activations).enumerate() {
            if z.cols() != layer.weights.rows() || trace.inputs[i].cols() != layer.weights.cols() {
                return Err(HiganError::TraceMismatch(format!("layer {i} dims differ")));
            }
        }
        let expected = (trace.batch_size(), self.output_dim());
        if d_out.shape() != expected {
            return Err(HiganError::TraceMismatch(format!(
                "upstream gradient {:?}, output {:?}",
                d_out.shape(),
                expected
            )));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = d_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let z = &trace.pre_activations[i];
            let mut dz = upstream;
            for (g, &zv) in dz.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *g *= layer.activation.derivative(zv);
            }
            let d_weights = dz.t_matmul(&trace.inputs[i])?;
            let mut d_bias = vec![0.0; layer.bias.len()];
            for r in 0..dz.rows() {
                for (b, g) in d_bias.iter_mut().zip(dz.row(r)) {
                    *b += g;
                }
            }
            upstream = dz.matmul(&layer.weights)?;
            grads.push(LayerGrad {
                weights: d_weights,
                bias: d_bias,
            });
        }
        grads.reverse();
        Ok((NetworkGrads { layers: grads }, upstream))
    }
}
