//! k-nearest-neighbour majority vote.

use serde::{Deserialize, Serialize};

use super::persist::f64_b64;
use super::ClassifyError;
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl Metric {
    /// Squared euclidean distance (same ordering as euclidean) or cosine
    /// distance `1 - cos`, taking a zero vector as orthogonal to everything.
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
            Metric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (na * nb)
                }
            }
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(format!("unknown distance metric `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub metric: Metric,
    pub n_classes: usize,
    pub n_features: usize,
    /// Training rows, row-major.
    #[serde(with = "f64_b64")]
    pub points: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Knn {
    pub fn fit(x: &DenseMatrix, y: &[usize], n_classes: usize, k: usize, metric: Metric) -> Result<Self, ClassifyError> {
        if k == 0 {
            return Err(ClassifyError::InvalidConfig("k must be at least 1".into()));
        }
        if k > x.rows() {
            return Err(ClassifyError::KTooLarge { k, n: x.rows() });
        }
        Ok(Knn {
            k,
            metric,
            n_classes,
            n_features: x.cols(),
            points: x.as_slice().to_vec(),
            labels: y.to_vec(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Training row indices of the `k` nearest neighbours, nearest first;
    /// equal distances keep the lower row index.
    pub fn neighbours(&self, query: &[f64]) -> Vec<usize> {
        let d = self.n_features;
        let mut dist: Vec<(f64, usize)> = (0..self.labels.len())
            .map(|i| {
                let row = if d == 0 { &[][..] } else { &self.points[i * d..(i + 1) * d] };
                (self.metric.distance(query, row), i)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dist.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    pub fn vote_fractions(&self, query: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for i in self.neighbours(query) {
            votes[self.labels[i]] += 1.0;
        }
        votes.iter_mut().for_each(|v| *v /= self.k as f64);
        votes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::argmax;

    fn line() -> (DenseMatrix, Vec<usize>) {
        let x = DenseMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![10.0], vec![11.0]]);
        (x, vec![0, 0, 0, 1, 1])
    }

    #[test]
    fn cluster_center_query() {
        let (x, y) = line();
        let knn = Knn::fit(&x, &y, 2, 3, Metric::Euclidean).unwrap();
        assert_eq!(argmax(&knn.vote_fractions(&[1.0])), 0);
        assert_eq!(knn.vote_fractions(&[1.0]), [1.0, 0.0]);
    }

    #[test]
    fn k_one_returns_training_label() {
        let (x, y) = line();
        let knn = Knn::fit(&x, &y, 2, 1, Metric::Euclidean).unwrap();
        for (row, &label) in x.iter_rows().zip(&y) {
            assert_eq!(argmax(&knn.vote_fractions(row)), label);
        }
    }

    #[test]
    fn k_equal_n_is_global_majority() {
        let (x, y) = line();
        let knn = Knn::fit(&x, &y, 2, 5, Metric::Euclidean).unwrap();
        assert_eq!(argmax(&knn.vote_fractions(&[100.0])), 0);
        assert!(matches!(
            Knn::fit(&x, &y, 2, 6, Metric::Euclidean),
            Err(ClassifyError::KTooLarge { k: 6, n: 5 })
        ));
    }

    #[test]
    fn distance_ties_prefer_lower_row() {
        let x = DenseMatrix::from_rows(&[vec![-1.0], vec![1.0]]);
        let knn = Knn::fit(&x, &[1, 0], 2, 1, Metric::Euclidean).unwrap();
        assert_eq!(knn.neighbours(&[0.0]), [0]);
        assert_eq!(knn.vote_fractions(&[0.0]), [0.0, 1.0]);
    }

    #[test]
    fn cosine_ignores_magnitude() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let knn = Knn::fit(&x, &[0, 1], 2, 1, Metric::Cosine).unwrap();
        assert_eq!(knn.neighbours(&[100.0, 1.0]), [0]);
        assert_eq!(knn.neighbours(&[0.1, 5.0]), [1]);
    }
}
