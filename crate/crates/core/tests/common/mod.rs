//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use higan::losses::{coral_loss, lsgan_d_loss, lsgan_g_loss, reg_loss};
use higan::mlp::{chain_specs, MlpNetwork};
use higan::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const FD_STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// Central difference of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &Matrix, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let mut g = Matrix::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for i in 0..x.as_slice().len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + FD_STEP;
        let up = f(&probe);
        probe.as_mut_slice()[i] = orig - FD_STEP;
        let down = f(&probe);
        probe.as_mut_slice()[i] = orig;
        g.as_mut_slice()[i] = (up - down) / (2.0 * FD_STEP);
    }
    g
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    let scale = a.frobenius_norm().max(b.frobenius_norm());
    if scale == 0.0 {
        return 0.0;
    }
    a.sub(b).unwrap().frobenius_norm() / scale
}

/// Worst relative error of the CORAL gradients on one random pair.
pub fn coral_instance(rng: &mut ChaCha8Rng) -> f64 {
    let d = rng.random_range(1..=5);
    let real_rows = rng.random_range(2..=8);
    let real = random_matrix(rng, real_rows, d);
    let gen_rows = rng.random_range(2..=8);
    let gen = random_matrix(rng, gen_rows, d);
    let l = coral_loss(&real, &gen).unwrap();
    let nr = numeric_grad(&real, |x| coral_loss(x, &gen).unwrap().value);
    let ng = numeric_grad(&gen, |x| coral_loss(&real, x).unwrap().value);
    rel_err(&l.grads[0], &nr).max(rel_err(&l.grads[1], &ng))
}

pub fn lsgan_d_instance(rng: &mut ChaCha8Rng) -> f64 {
    let real_rows = rng.random_range(1..=10);
    let real = random_matrix(rng, real_rows, 1);
    let fake_rows = rng.random_range(1..=10);
    let fake = random_matrix(rng, fake_rows, 1);
    let l = lsgan_d_loss(&real, &fake).unwrap();
    let nr = numeric_grad(&real, |x| lsgan_d_loss(x, &fake).unwrap().value);
    let nf = numeric_grad(&fake, |x| lsgan_d_loss(&real, x).unwrap().value);
    rel_err(&l.grads[0], &nr).max(rel_err(&l.grads[1], &nf))
}

pub fn lsgan_g_instance(rng: &mut ChaCha8Rng) -> f64 {
    let fake_rows = rng.random_range(1..=10);
    let fake = random_matrix(rng, fake_rows, 1);
    let l = lsgan_g_loss(&fake).unwrap();
    rel_err(&l.grads[0], &numeric_grad(&fake, |x| lsgan_g_loss(x).unwrap().value))
}

fn random_dims(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let depth = rng.random_range(1..=3);
    (0..=depth).map(|_| rng.random_range(1..=8)).collect()
}

pub fn reg_instance(rng: &mut ChaCha8Rng) -> f64 {
    let net = MlpNetwork::init(&chain_specs(&random_dims(rng)), rng.random()).unwrap();
    let analytic = reg_loss(&[&net]).grads;
    let mut worst: f64 = 0.0;
    for (k, g) in analytic.iter().enumerate() {
        let w = &net.layers()[k].weights;
        let numeric = numeric_grad(w, |x| {
            let mut probe = net.clone();
            probe.layers_mut()[k].weights = x.clone();
            reg_loss(&[&probe]).value
        });
        worst = worst.max(rel_err(g, &numeric));
    }
    worst
}

/// Smallest pre-activation magnitude anywhere in the forward pass.
fn kink_distance(net: &MlpNetwork, x: &Matrix) -> f64 {
    let (_, trace) = net.forward(x).unwrap();
    trace
        .pre_activations()
        .iter()
        .flat_map(|z| z.as_slice().iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min)
}

/// Backprop of `L = Σ Y ⊙ R` for random `R`, checked on every weight, bias
/// and the input.
///
/// Biases are randomized and instances with any pre-activation within 1e-4
/// of zero are redrawn, so the central difference never straddles a ReLU
/// kink. With the zero bias init a row whose previous layer is entirely
/// inactive would sit exactly on one.
pub fn mlp_instance(rng: &mut ChaCha8Rng) -> f64 {
    let (net, x) = loop {
        let dims = random_dims(rng);
        let mut net = MlpNetwork::init(&chain_specs(&dims), rng.random()).unwrap();
        for layer in net.layers_mut() {
            layer.bias.iter_mut().for_each(|b| *b = rng.sample::<f64, _>(StandardNormal));
        }
        let x_rows = rng.random_range(1..=5);
        let x = random_matrix(rng, x_rows, dims[0]);
        if kink_distance(&net, &x) >= 1e-4 {
            break (net, x);
        }
    };
    let r = random_matrix(rng, x.rows(), net.output_dim());
    let loss = |n: &MlpNetwork, x: &Matrix| -> f64 {
        let y = n.predict(x).unwrap();
        y.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b).sum()
    };
    let (_, trace) = net.forward(&x).unwrap();
    let (grads, dx) = net.backward(&trace, &r).unwrap();

    let mut worst = rel_err(&dx, &numeric_grad(&x, |p| loss(&net, p)));
    for (k, g) in grads.layers.iter().enumerate() {
        let w = &net.layers()[k].weights;
        let nw = numeric_grad(w, |p| {
            let mut probe = net.clone();
            probe.layers_mut()[k].weights = p.clone();
            loss(&probe, &x)
        });
        let b = Matrix::new(1, g.bias.len(), net.layers()[k].bias.clone()).unwrap();
        let nb = numeric_grad(&b, |p| {
            let mut probe = net.clone();
            probe.layers_mut()[k].bias = p.as_slice().to_vec();
            loss(&probe, &x)
        });
        let gb = Matrix::new(1, g.bias.len(), g.bias.clone()).unwrap();
        worst = worst.max(rel_err(&g.weights, &nw)).max(rel_err(&gb, &nb));
    }
    worst
}

/// Covariance written literally as `(1/(n−1))(XᵀX − (1/n)(1ᵀX)ᵀ(1ᵀX))`.
pub fn literal_covariance(x: &Matrix) -> Matrix {
    let (n, d) = x.shape();
    let mut ones_x = vec![0.0; d];
    for i in 0..n {
        for (j, s) in ones_x.iter_mut().enumerate() {
            *s += x.get(i, j);
        }
    }
    let mut c = Matrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let mut xtx = 0.0;
            for i in 0..n {
                xtx += x.get(i, a) * x.get(i, b);
            }
            c.set(a, b, (xtx - ones_x[a] * ones_x[b] / n as f64) / (n as f64 - 1.0));
        }
    }
    c
}

/// CORAL written literally as `1/(4d²)·‖C_s − C_t‖²_F`.
pub fn literal_coral(s: &Matrix, t: &Matrix) -> f64 {
    let d = s.cols() as f64;
    let (cs, ct) = (literal_covariance(s), literal_covariance(t));
    let sq: f64 = cs.as_slice().iter().zip(ct.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
    sq / (4.0 * d * d)
}
