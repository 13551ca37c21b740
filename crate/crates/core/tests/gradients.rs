mod common;

use common::*;
use higan::losses::coral_loss;
use higan::mlp::{Activation, Layer, MlpNetwork};
use higan::Matrix;

const TOL: f64 = 1e-5;

fn worst_of(seed: u64, instances: usize, check: fn(&mut rand_chacha::ChaCha8Rng) -> f64) -> f64 {
    let mut r = rng(seed);
    (0..instances).map(|_| check(&mut r)).fold(0.0, f64::max)
}

#[test]
fn coral_gradients_match_finite_differences() {
    let worst = worst_of(11, 150, coral_instance);
    assert!(worst <= TOL, "worst {worst:e}");
}

#[test]
fn lsgan_discriminator_gradients_match_finite_differences() {
    let worst = worst_of(12, 150, lsgan_d_instance);
    assert!(worst <= TOL, "worst {worst:e}");
}

#[test]
fn lsgan_generator_gradients_match_finite_differences() {
    let worst = worst_of(13, 150, lsgan_g_instance);
    assert!(worst <= TOL, "worst {worst:e}");
}

#[test]
fn regularizer_gradients_match_finite_differences() {
    let worst = worst_of(14, 150, reg_instance);
    assert!(worst <= TOL, "worst {worst:e}");
}

#[test]
fn backprop_matches_finite_differences() {
    let worst = worst_of(15, 150, mlp_instance);
    assert!(worst <= TOL, "worst {worst:e}");
}

#[test]
fn coral_gradient_on_wide_batches() {
    // Larger n and d than the suite draws, where the 2/(n-1) factor and the
    // 1/(4d²) scale dominate.
    let mut r = rng(16);
    for (n, d) in [(40, 12), (3, 20), (64, 5)] {
        let real = random_matrix(&mut r, n, d);
        let gen = random_matrix(&mut r, n + 7, d).scale(1.7);
        let l = coral_loss(&real, &gen).unwrap();
        let ng = numeric_grad(&gen, |x| coral_loss(&real, x).unwrap().value);
        assert!(rel_err(&l.grads[1], &ng) <= TOL);
    }
}

#[test]
fn relu_derivative_at_zero_is_zero() {
    let net = MlpNetwork::from_layers(
        vec![Layer {
            weights: Matrix::from_rows(&[[1.0]]).unwrap(),
            bias: vec![0.0],
            activation: Activation::Relu,
        }],
        0,
    )
    .unwrap();
    let x = Matrix::from_rows(&[[0.0]]).unwrap();
    let (_, trace) = net.forward(&x).unwrap();
    let (grads, dx) = net.backward(&trace, &Matrix::filled(1, 1, 1.0)).unwrap();
    assert_eq!(dx.get(0, 0), 0.0);
    assert_eq!(grads.layers[0].bias[0], 0.0);
}
