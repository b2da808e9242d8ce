//! Linear SVM trained by primal sub-gradient descent (Pegasos) on the
//! L2-regularized hinge loss, with one-vs-rest for more than two classes.
//!
//! The bias is learned as the weight of a constant-1 input and is
//! regularized along with the other weights.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::persist::f64_b64;
use super::ClassifyError;
use crate::matrix::DenseMatrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-4,
            epochs: 20,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub n_classes: usize,
    pub n_features: usize,
    /// One row per binary machine: a single machine (class 1 positive) for
    /// two classes, otherwise one per class.
    #[serde(with = "f64_b64")]
    pub weights: Vec<f64>,
    #[serde(with = "f64_b64")]
    pub biases: Vec<f64>,
}

/// `lambda/2 (|w|^2 + b^2) + mean(max(0, 1 - y (w.x + b)))` for `y` in {-1, +1}.
pub fn hinge_objective(w: &[f64], b: f64, x: &DenseMatrix, y: &[f64], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
    let loss: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(row, &yi)| (1.0 - yi * (dot(w, row) + b)).max(0.0))
        .sum();
    reg + loss / x.rows() as f64
}

/// Sub-gradient of [`hinge_objective`] with respect to `(w, b)`; samples
/// exactly on the margin contribute nothing.
pub fn hinge_subgradient(w: &[f64], b: f64, x: &DenseMatrix, y: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let n = x.rows() as f64;
    let mut gw: Vec<f64> = w.iter().map(|v| lambda * v).collect();
    let mut gb = lambda * b;
    for (row, &yi) in x.iter_rows().zip(y) {
        if yi * (dot(w, row) + b) < 1.0 {
            for (g, v) in gw.iter_mut().zip(row) {
                *g -= yi * v / n;
            }
            gb -= yi / n;
        }
    }
    (gw, gb)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pegasos on one binary problem. The visiting order depends only on the
/// seed, never on the labels.
fn pegasos(x: &DenseMatrix, y: &[f64], config: &SvmConfig) -> (Vec<f64>, f64) {
    let d = x.cols();
    let lambda = config.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut rng = rng::seeded(config.seed);
    let mut t = 0u64;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let row = x.row(i);
            let margin = y[i] * (dot(&w, row) + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            b *= shrink;
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(row) {
                    *wj += eta * y[i] * xj;
                }
                b += eta * y[i];
            }
            let norm = (dot(&w, &w) + b * b).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
                b *= s;
            }
        }
    }
    (w, b)
}

impl LinearSvm {
    pub fn fit(x: &DenseMatrix, y: &[usize], n_classes: usize, config: &SvmConfig) -> Result<Self, ClassifyError> {
        if !(config.lambda > 0.0 && config.lambda.is_finite()) {
            return Err(ClassifyError::InvalidConfig(format!(
                "lambda must be positive, got {}",
                config.lambda
            )));
        }
        if config.epochs == 0 {
            return Err(ClassifyError::InvalidConfig("epochs must be at least 1".into()));
        }
        let positives: Vec<usize> = if n_classes == 2 { vec![1] } else { (0..n_classes).collect() };
        let mut weights = Vec::with_capacity(positives.len() * x.cols());
        let mut biases = Vec::with_capacity(positives.len());
        for pos in positives {
            let signs: Vec<f64> = y.iter().map(|&c| if c == pos { 1.0 } else { -1.0 }).collect();
            let (w, b) = pegasos(x, &signs, config);
            if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
                return Err(ClassifyError::NonFinite);
            }
            weights.extend(w);
            biases.push(b);
        }
        Ok(LinearSvm {
            n_classes,
            n_features: x.cols(),
            weights,
            biases,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Signed margins; the binary machine's margin `m` becomes `[-m, m]`.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let d = self.n_features;
        let margins: Vec<f64> = self
            .biases
            .iter()
            .enumerate()
            .map(|(m, b)| dot(&self.weights[m * d..(m + 1) * d], row) + b)
            .collect();
        if self.n_classes == 2 {
            vec![-margins[0], margins[0]]
        } else {
            margins
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::argmax;

    fn separable() -> (DenseMatrix, Vec<usize>) {
        // separator x0 + x1 = 0 with every point at distance >= 1
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.3 - 3.0;
            rows.push(vec![t + 1.0, -t + 1.0]);
            y.push(1);
            rows.push(vec![t - 1.0, -t - 1.0]);
            y.push(0);
        }
        (DenseMatrix::from_rows(&rows), y)
    }

    #[test]
    fn separable_data_is_fit() {
        let (x, y) = separable();
        let cfg = SvmConfig {
            lambda: 1e-3,
            epochs: 50,
            seed: 3,
        };
        let svm = LinearSvm::fit(&x, &y, 2, &cfg).unwrap();
        for (row, &label) in x.iter_rows().zip(&y) {
            assert_eq!(argmax(&svm.scores(row)), label);
        }
    }

    #[test]
    fn stronger_regularization_shrinks_weights() {
        let (x, y) = separable();
        let norm = |lambda| {
            let cfg = SvmConfig {
                lambda,
                epochs: 30,
                seed: 3,
            };
            let svm = LinearSvm::fit(&x, &y, 2, &cfg).unwrap();
            svm.weights.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        assert!(norm(1.0) < norm(0.1));
        assert!(norm(0.1) < norm(0.01));
    }

    #[test]
    fn identical_features_reduce_to_bias() {
        let x = DenseMatrix::from_rows(&vec![vec![0.5, 0.5]; 10]);
        let y: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let svm = LinearSvm::fit(&x, &y, 2, &SvmConfig::default()).unwrap();
        let s = svm.scores(x.row(0));
        let correct = y.iter().filter(|&&l| l == argmax(&s)).count();
        assert_eq!(correct, 5);
    }

    #[test]
    fn subgradient_matches_finite_difference() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.3], vec![0.7, -1.2], vec![2.0, 0.1]]);
        let y = [1.0, -1.0, -1.0, 1.0];
        let w = [0.13, -0.27];
        let b = 0.05;
        let lambda = 0.1;
        let (gw, gb) = hinge_subgradient(&w, b, &x, &y, lambda);
        let h = 1e-6;
        for j in 0..2 {
            let mut up = w;
            let mut down = w;
            up[j] += h;
            down[j] -= h;
            let fd = (hinge_objective(&up, b, &x, &y, lambda) - hinge_objective(&down, b, &x, &y, lambda)) / (2.0 * h);
            assert!((fd - gw[j]).abs() <= 1e-5 * fd.abs().max(1e-3), "{fd} vs {}", gw[j]);
        }
        let fd = (hinge_objective(&w, b + h, &x, &y, lambda) - hinge_objective(&w, b - h, &x, &y, lambda)) / (2.0 * h);
        assert!((fd - gb).abs() <= 1e-5 * fd.abs().max(1e-3));
    }

    #[test]
    fn one_vs_rest_three_classes() {
        let rows = vec![
            vec![0.0, 5.0],
            vec![0.3, 5.2],
            vec![5.0, 0.0],
            vec![5.1, 0.4],
            vec![-5.0, -5.0],
            vec![-5.2, -4.8],
        ];
        let x = DenseMatrix::from_rows(&rows);
        let y = [0, 0, 1, 1, 2, 2];
        let cfg = SvmConfig {
            lambda: 1e-2,
            epochs: 100,
            seed: 7,
        };
        let svm = LinearSvm::fit(&x, &y, 3, &cfg).unwrap();
        assert_eq!(svm.biases.len(), 3);
        for (row, &label) in x.iter_rows().zip(&y) {
            assert_eq!(argmax(&svm.scores(row)), label);
        }
    }
}
