//! Multinomial logistic regression fit by full-batch gradient descent.

use crate::error::{HiganError, Result};
use crate::linalg::Matrix;

const STEP: f64 = 0.5;
const L2: f64 = 1e-4;

/// Softmax classifier over standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `classes × (d + 1)`, last column is the bias.
    weights: Matrix,
    iterations: usize,
}

impl SoftmaxClassifier {
    /// Fits on `(x, labels)` with classes `0..=max(labels)`. Stops when the
    /// largest gradient entry drops below `tol` or after `max_iters` steps.
    /// Parameters start at zero, so the fit is deterministic.
    pub fn fit(x: &Matrix, labels: &[usize], max_iters: usize, tol: f64) -> Result<Self> {
        if x.rows() == 0 || labels.len() != x.rows() {
            return Err(HiganError::BadSpec(format!(
                "{} labels for {} training rows",
                labels.len(),
                x.rows()
            )));
        }
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        let d = x.cols();
        let mean = x.column_means();
        let centered = x.centered();
        let scale: Vec<f64> = (0..d)
            .map(|j| {
                let var = (0..x.rows()).map(|i| centered.get(i, j).powi(2)).sum::<f64>() / x.rows() as f64;
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let mut model = Self {
            mean,
            scale,
            weights: Matrix::zeros(classes, d + 1),
            iterations: 0,
        };
        if classes < 2 {
            return Ok(model);
        }
        let z = model.standardize(x);
        let n = x.rows() as f64;
        for it in 0..max_iters {
            let probs = model.probabilities(&z);
            let mut grad = Matrix::zeros(classes, d + 1);
            for (i, &label) in labels.iter().enumerate() {
                let zi = z.row(i);
                for c in 0..classes {
                    let err = probs.get(i, c) - if label == c { 1.0 } else { 0.0 };
                    if err == 0.0 {
                        continue;
                    }
                    for (j, &zj) in zi.iter().enumerate() {
                        grad.set(c, j, grad.get(c, j) + err * zj / n);
                    }
                    grad.set(c, d, grad.get(c, d) + err / n);
                }
            }
            for c in 0..classes {
                for j in 0..d {
                    grad.set(c, j, grad.get(c, j) + L2 * model.weights.get(c, j));
                }
            }
            model.iterations = it + 1;
            let max_abs = grad.as_slice().iter().fold(0.0f64, |m, g| m.max(g.abs()));
            model.weights.add_scaled(&grad, -STEP)?;
            if max_abs < tol {
                break;
            }
        }
        Ok(model)
    }

    pub fn classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn standardize(&self, x: &Matrix) -> Matrix {
        Matrix::from_fn(x.rows(), x.cols(), |i, j| (x.get(i, j) - self.mean[j]) / self.scale[j])
    }

    fn logits(&self, z: &Matrix) -> Matrix {
        let d = z.cols();
        Matrix::from_fn(z.rows(), self.classes(), |i, c| {
            let w = self.weights.row(c);
            w[d] + z.row(i).iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
        })
    }

    fn probabilities(&self, z: &Matrix) -> Matrix {
        let mut p = self.logits(z);
        let classes = self.classes();
        for i in 0..p.rows() {
            let row = &mut p.as_mut_slice()[i * classes..(i + 1) * classes];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
        p
    }

    /// Argmax class per row; ties go to the lowest class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        if x.cols() != self.mean.len() {
            return Err(HiganError::ShapeMismatch {
                op: "classifier predict",
                left: (x.rows(), self.mean.len()),
                right: x.shape(),
            });
        }
        if self.classes() < 2 {
            return Ok(vec![0; x.rows()]);
        }
        let logits = self.logits(&self.standardize(x));
        Ok((0..logits.rows())
            .map(|i| {
                let row = logits.row(i);
                let mut best = 0;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }
}
