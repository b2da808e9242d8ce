//! Multinomial and Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use super::persist::f64_b64;
use super::{check_nonnegative, softmax, ClassifyError};
use crate::matrix::DenseMatrix;

const VAR_FLOOR: f64 = 1e-9;

fn class_log_prior(y: &[usize], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n_classes];
    for &c in y {
        counts[c] += 1;
    }
    let n = y.len() as f64;
    counts.iter().map(|&c| (c as f64 / n).ln()).collect()
}

/// Laplace-smoothed per-class feature-frequency model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialNb {
    pub n_features: usize,
    pub alpha: f64,
    #[serde(with = "f64_b64")]
    pub class_log_prior: Vec<f64>,
    /// Row-major `n_classes x n_features` log P(feature | class).
    #[serde(with = "f64_b64")]
    pub feature_log_prob: Vec<f64>,
}

impl MultinomialNb {
    pub fn fit(x: &DenseMatrix, y: &[usize], n_classes: usize, alpha: f64) -> Result<Self, ClassifyError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ClassifyError::InvalidConfig(format!("alpha must be positive, got {alpha}")));
        }
        check_nonnegative(x)?;
        let d = x.cols();
        let mut counts = vec![0.0; n_classes * d];
        for (row, &c) in x.iter_rows().zip(y) {
            for (acc, v) in counts[c * d..(c + 1) * d].iter_mut().zip(row) {
                *acc += v;
            }
        }
        let mut feature_log_prob = Vec::with_capacity(n_classes * d);
        for c in 0..n_classes {
            let class_counts = &counts[c * d..(c + 1) * d];
            let total: f64 = class_counts.iter().sum::<f64>() + alpha * d as f64;
            feature_log_prob.extend(class_counts.iter().map(|n| ((n + alpha) / total).ln()));
        }
        Ok(MultinomialNb {
            n_features: d,
            alpha,
            class_log_prior: class_log_prior(y, n_classes),
            feature_log_prob,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn joint_log_likelihood(&self, row: &[f64]) -> Vec<f64> {
        let d = self.n_features;
        self.class_log_prior
            .iter()
            .enumerate()
            .map(|(c, prior)| {
                let flp = &self.feature_log_prob[c * d..(c + 1) * d];
                prior + row.iter().zip(flp).map(|(x, l)| x * l).sum::<f64>()
            })
            .collect()
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        softmax(&self.joint_log_likelihood(row))
    }
}

/// Per-class independent normal features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub n_features: usize,
    #[serde(with = "f64_b64")]
    pub class_log_prior: Vec<f64>,
    /// Row-major `n_classes x n_features`.
    #[serde(with = "f64_b64")]
    pub means: Vec<f64>,
    /// Row-major `n_classes x n_features`, floored at 1e-9.
    #[serde(with = "f64_b64")]
    pub variances: Vec<f64>,
}

impl GaussianNb {
    pub fn fit(x: &DenseMatrix, y: &[usize], n_classes: usize) -> Self {
        let d = x.cols();
        let mut sizes = vec![0usize; n_classes];
        let mut means = vec![0.0; n_classes * d];
        for (row, &c) in x.iter_rows().zip(y) {
            sizes[c] += 1;
            for (m, v) in means[c * d..(c + 1) * d].iter_mut().zip(row) {
                *m += v;
            }
        }
        for c in 0..n_classes {
            let n = sizes[c].max(1) as f64;
            means[c * d..(c + 1) * d].iter_mut().for_each(|m| *m /= n);
        }
        let mut variances = vec![0.0; n_classes * d];
        for (row, &c) in x.iter_rows().zip(y) {
            let mu = &means[c * d..(c + 1) * d];
            for ((s, v), m) in variances[c * d..(c + 1) * d].iter_mut().zip(row).zip(mu) {
                *s += (v - m) * (v - m);
            }
        }
        for c in 0..n_classes {
            let n = sizes[c].max(1) as f64;
            variances[c * d..(c + 1) * d]
                .iter_mut()
                .for_each(|s| *s = (*s / n).max(VAR_FLOOR));
        }
        GaussianNb {
            n_features: d,
            class_log_prior: class_log_prior(y, n_classes),
            means,
            variances,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn joint_log_likelihood(&self, row: &[f64]) -> Vec<f64> {
        let d = self.n_features;
        let two_pi = 2.0 * std::f64::consts::PI;
        self.class_log_prior
            .iter()
            .enumerate()
            .map(|(c, prior)| {
                let mu = &self.means[c * d..(c + 1) * d];
                let var = &self.variances[c * d..(c + 1) * d];
                let ll: f64 = row
                    .iter()
                    .zip(mu)
                    .zip(var)
                    .map(|((x, m), v)| (two_pi * v).ln() + (x - m) * (x - m) / v)
                    .sum();
                prior - 0.5 * ll
            })
            .collect()
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        softmax(&self.joint_log_likelihood(row))
    }
}
