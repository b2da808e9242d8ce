//! Gradient boosting with depth-limited regression trees.
//!
//! Two classes use the logistic loss with one tree per stage; more classes
//! use the softmax loss with one tree per class per stage. Trees are grown on
//! the negative gradients with Friedman's MSE split criterion and their leaves
//! are set by a single Newton step.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{softmax, ClassifyError};
use crate::embeddings::sigmoid;
use crate::matrix::DenseMatrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmConfig {
    pub learning_rate: f64,
    pub n_trees: usize,
    pub subsample: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            learning_rate: 0.1,
            n_trees: 100,
            subsample: 1.0,
            max_depth: 3,
            min_samples_split: 2,
            min_samples_leaf: 1,
            seed: 1,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        let bad = |msg: String| Err(ClassifyError::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate must be in (0, 1], got {}", self.learning_rate));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!("subsample must be in (0, 1], got {}", self.subsample));
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1".into());
        }
        if self.min_samples_leaf == 0 || self.min_samples_split < 2 {
            return bad("min_samples_leaf must be >= 1 and min_samples_split >= 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GbmLoss {
    Logistic,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Root first.
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
                Node::Leaf { value } => return value,
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// `n_l n_r / (n_l + n_r) * (mean_l - mean_r)^2`
    pub improvement: f64,
    pub n_left: usize,
}

/// Scans one feature's samples in ascending value order. Candidate
/// thresholds sit midway between consecutive distinct values; the first of
/// equally good candidates wins.
fn scan_feature(
    order: &[usize],
    column: &[f64],
    targets: &[f64],
    min_samples_leaf: usize,
    feature: usize,
) -> Option<Split> {
    let n = order.len();
    let total: f64 = order.iter().map(|&i| targets[i]).sum();
    let mut left_sum = 0.0;
    let mut best: Option<Split> = None;
    for pos in 0..n.saturating_sub(1) {
        let (a, b) = (column[order[pos]], column[order[pos + 1]]);
        left_sum += targets[order[pos]];
        let n_l = pos + 1;
        let n_r = n - n_l;
        if a >= b || n_l < min_samples_leaf || n_r < min_samples_leaf {
            continue;
        }
        let diff = left_sum / n_l as f64 - (total - left_sum) / n_r as f64;
        let improvement = (n_l * n_r) as f64 / n as f64 * diff * diff;
        if best.is_none_or(|s| improvement > s.improvement) {
            let mid = a + (b - a) / 2.0;
            // guards against the midpoint rounding up onto `b`
            let threshold = if mid < b { mid } else { a };
            best = Some(Split {
                feature,
                threshold,
                improvement,
                n_left: n_l,
            });
        }
    }
    best
}

fn better(candidate: Option<Split>, best: Option<Split>) -> Option<Split> {
    match (candidate, best) {
        (Some(c), Some(b)) if c.improvement > b.improvement => Some(c),
        (Some(c), None) => Some(c),
        (_, b) => b,
    }
}

/// Best Friedman-MSE split of `samples` over all features, or `None` when no
/// split leaves `min_samples_leaf` rows on both sides. Ties go to the lower
/// feature index, then the lower threshold.
pub fn best_split(x: &DenseMatrix, targets: &[f64], samples: &[usize], min_samples_leaf: usize) -> Option<Split> {
    let mut best = None;
    for f in 0..x.cols() {
        let column: Vec<f64> = (0..x.rows()).map(|i| x.get(i, f)).collect();
        let mut order = samples.to_vec();
        order.sort_by(|&a, &b| column[a].total_cmp(&column[b]).then(a.cmp(&b)));
        best = better(scan_feature(&order, &column, targets, min_samples_leaf, f), best);
    }
    best
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    targets: &'a [f64],
    hessians: &'a [f64],
    /// Multiplier on the Newton leaf value, `(K - 1) / K` for softmax.
    leaf_scale: f64,
    config: &'a GbmConfig,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
}

impl TreeBuilder<'_> {
    fn leaf_value(&self, samples: &[usize]) -> f64 {
        let num: f64 = samples.iter().map(|&i| self.targets[i]).sum();
        let den: f64 = samples.iter().map(|&i| self.hessians[i]).sum();
        if den.abs() < 1e-150 {
            0.0
        } else {
            self.leaf_scale * num / den
        }
    }

    /// `samples` is the node's rows in index order, `sorted[f]` the same rows
    /// in ascending order of feature `f`.
    fn grow(&mut self, samples: Vec<usize>, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(&samples),
        });
        let n = samples.len();
        let first = self.targets[samples[0]];
        let constant = samples.iter().all(|&i| self.targets[i] == first);
        if depth >= self.config.max_depth
            || n < self.config.min_samples_split
            || n < 2 * self.config.min_samples_leaf
            || constant
        {
            return id;
        }
        let mut best = None;
        for (f, order) in sorted.iter().enumerate() {
            let candidate = scan_feature(order, &self.columns[f], self.targets, self.config.min_samples_leaf, f);
            best = better(candidate, best);
        }
        let Some(split) = best else {
            return id;
        };
        let column = &self.columns[split.feature];
        for &i in &samples {
            self.goes_left[i] = column[i] <= split.threshold;
        }
        let (left_samples, right_samples): (Vec<usize>, Vec<usize>) =
            samples.iter().partition(|&&i| self.goes_left[i]);
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        for order in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&i| self.goes_left[i]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        let left = self.grow(left_samples, left_sorted, depth + 1);
        let right = self.grow(right_samples, right_sorted, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Fitted boosting ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbm {
    pub loss: GbmLoss,
    pub n_classes: usize,
    pub n_features: usize,
    pub learning_rate: f64,
    /// Initial raw score per tree slot (one for logistic).
    pub init: Vec<f64>,
    /// One entry per stage, each holding one tree per tree slot.
    pub stages: Vec<Vec<RegressionTree>>,
}

impl Gbm {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Summed raw scores, one per tree slot.
    pub fn raw_scores(&self, row: &[f64]) -> Vec<f64> {
        let mut f = self.init.clone();
        for stage in &self.stages {
            for (fk, tree) in f.iter_mut().zip(stage) {
                *fk += self.learning_rate * tree.predict(row);
            }
        }
        f
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let f = self.raw_scores(row);
        match self.loss {
            GbmLoss::Logistic => {
                let p = sigmoid(f[0]);
                vec![1.0 - p, p]
            }
            GbmLoss::Softmax => softmax(&f),
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn mean_loss(loss: GbmLoss, raw: &[Vec<f64>], y: &[usize]) -> f64 {
    let total: f64 = match loss {
        GbmLoss::Logistic => raw
            .iter()
            .zip(y)
            .map(|(f, &c)| softplus(f[0]) - if c == 1 { f[0] } else { 0.0 })
            .sum(),
        GbmLoss::Softmax => raw
            .iter()
            .zip(y)
            .map(|(f, &c)| {
                let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + f.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                lse - f[c]
            })
            .sum(),
    };
    total / y.len() as f64
}

/// Fits a boosting ensemble and returns it with the mean training loss
/// before the first stage and after every stage.
pub fn fit_gbm(
    x: &DenseMatrix,
    y: &[usize],
    n_classes: usize,
    config: &GbmConfig,
) -> Result<(Gbm, Vec<f64>), ClassifyError> {
    config.validate()?;
    let n = x.rows();
    let mut counts = vec![0usize; n_classes];
    for &c in y {
        counts[c] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(ClassifyError::SingleClass);
    }
    let (loss, slots) = if n_classes == 2 {
        (GbmLoss::Logistic, 1)
    } else {
        (GbmLoss::Softmax, n_classes)
    };
    let init: Vec<f64> = match loss {
        GbmLoss::Logistic => {
            let p = counts[1] as f64 / n as f64;
            vec![(p / (1.0 - p)).ln()]
        }
        GbmLoss::Softmax => counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect(),
    };
    let leaf_scale = match loss {
        GbmLoss::Logistic => 1.0,
        GbmLoss::Softmax => (n_classes - 1) as f64 / n_classes as f64,
    };

    let columns: Vec<Vec<f64>> = (0..x.cols())
        .map(|f| (0..n).map(|i| x.get(i, f)).collect())
        .collect();
    let presorted: Vec<Vec<usize>> = columns
        .iter()
        .map(|col| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            order
        })
        .collect();

    let mut raw: Vec<Vec<f64>> = vec![init.clone(); n];
    let mut losses = vec![mean_loss(loss, &raw, y)];
    let mut stages = Vec::with_capacity(config.n_trees);
    let mut rng = rng::seeded(config.seed);
    let n_sub = ((config.subsample * n as f64).round() as usize).clamp(1, n);
    let mut targets = vec![0.0; n];
    let mut hessians = vec![0.0; n];

    for _ in 0..config.n_trees {
        let samples: Vec<usize> = if n_sub < n {
            let mut s = index::sample(&mut rng, n, n_sub).into_vec();
            s.sort_unstable();
            s
        } else {
            (0..n).collect()
        };
        let in_bag = {
            let mut mask = vec![n_sub == n; n];
            for &i in &samples {
                mask[i] = true;
            }
            mask
        };
        let probs: Vec<Vec<f64>> = raw
            .iter()
            .map(|f| match loss {
                GbmLoss::Logistic => vec![sigmoid(f[0])],
                GbmLoss::Softmax => softmax(f),
            })
            .collect();
        let mut stage = Vec::with_capacity(slots);
        for k in 0..slots {
            let positive = if loss == GbmLoss::Logistic { 1 } else { k };
            for i in 0..n {
                let p = probs[i][k];
                let target = if y[i] == positive { 1.0 } else { 0.0 };
                targets[i] = target - p;
                hessians[i] = p * (1.0 - p);
            }
            let sorted: Vec<Vec<usize>> = presorted
                .iter()
                .map(|order| order.iter().copied().filter(|&i| in_bag[i]).collect())
                .collect();
            let mut builder = TreeBuilder {
                columns: &columns,
                targets: &targets,
                hessians: &hessians,
                leaf_scale,
                config,
                nodes: Vec::new(),
                goes_left: vec![false; n],
            };
            builder.grow(samples.clone(), sorted, 0);
            let tree = RegressionTree { nodes: builder.nodes };
            if tree.nodes.iter().any(|node| matches!(node, Node::Leaf { value } if !value.is_finite())) {
                return Err(ClassifyError::NonFinite);
            }
            stage.push(tree);
        }
        for (i, f) in raw.iter_mut().enumerate() {
            for (fk, tree) in f.iter_mut().zip(&stage) {
                *fk += config.learning_rate * tree.predict(x.row(i));
            }
        }
        losses.push(mean_loss(loss, &raw, y));
        stages.push(stage);
    }

    Ok((
        Gbm {
            loss,
            n_classes,
            n_features: x.cols(),
            learning_rate: config.learning_rate,
            init,
            stages,
        },
        losses,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::argmax;

    #[test]
    fn step_function_split() {
        let x = DenseMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let t = [0.0, 0.0, 1.0, 1.0];
        let s = best_split(&x, &t, &[0, 1, 2, 3], 1).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 2.5);
        assert_eq!(s.n_left, 2);
        // 2 * 2 / 4 * 1^2
        assert_eq!(s.improvement, 1.0);
        assert!(best_split(&x, &t, &[0, 1, 2, 3], 3).is_none());
    }

    #[test]
    fn duplicate_values_are_not_split() {
        let x = DenseMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]);
        assert!(best_split(&x, &[0.0, 1.0, 0.0], &[0, 1, 2], 1).is_none());
    }

    #[test]
    fn initial_score_is_log_odds() {
        let x = DenseMatrix::from_rows(&[vec![0.0], vec![0.0], vec![0.0], vec![1.0]]);
        let cfg = GbmConfig {
            n_trees: 0,
            ..GbmConfig::default()
        };
        let (gbm, losses) = fit_gbm(&x, &[0, 0, 0, 1], 2, &cfg).unwrap();
        assert!((gbm.init[0] - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        let p: f64 = 0.25;
        let expected = -(0.75 * (1.0 - p).ln() + 0.25 * p.ln());
        assert!((losses[0] - expected).abs() < 1e-12);
        assert!((gbm.predict_proba(&[5.0])[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_class_rejected() {
        let x = DenseMatrix::from_rows(&[vec![0.0], vec![1.0]]);
        assert!(matches!(
            fit_gbm(&x, &[1, 1], 2, &GbmConfig::default()),
            Err(ClassifyError::SingleClass)
        ));
    }

    #[test]
    fn trees_respect_depth_and_fit_threshold() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let y: Vec<usize> = (0..40).map(|i| usize::from(i >= 17)).collect();
        let x = DenseMatrix::from_rows(&rows);
        let (gbm, losses) = fit_gbm(&x, &y, 2, &GbmConfig::default()).unwrap();
        assert!(gbm.stages.iter().all(|s| s[0].depth() <= 3));
        assert!(losses.last().unwrap() < &0.05);
        for (row, &label) in x.iter_rows().zip(&y) {
            assert_eq!(argmax(&gbm.predict_proba(row)), label);
        }
    }

    #[test]
    fn softmax_three_classes() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 3) as f64 + 0.01 * i as f64]).collect();
        let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let x = DenseMatrix::from_rows(&rows);
        let (gbm, losses) = fit_gbm(&x, &y, 3, &GbmConfig::default()).unwrap();
        assert_eq!(gbm.loss, GbmLoss::Softmax);
        assert_eq!(gbm.stages[0].len(), 3);
        assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        for (row, &label) in x.iter_rows().zip(&y) {
            let p = gbm.predict_proba(row);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(argmax(&p), label);
        }
    }

    #[test]
    fn subsampling_is_seeded() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i * 37 % 50) as f64]).collect();
        let y: Vec<usize> = (0..50).map(|i| usize::from(i * 37 % 50 > 20)).collect();
        let x = DenseMatrix::from_rows(&rows);
        let cfg = GbmConfig {
            subsample: 0.5,
            n_trees: 10,
            seed: 9,
            ..GbmConfig::default()
        };
        let a = fit_gbm(&x, &y, 2, &cfg).unwrap().0;
        let b = fit_gbm(&x, &y, 2, &cfg).unwrap().0;
        assert_eq!(a, b);
        let c = fit_gbm(&x, &y, 2, &GbmConfig { seed: 10, ..cfg }).unwrap().0;
        assert_ne!(a, c);
    }
}
