//! From-scratch supervised learners: multinomial and Gaussian naive Bayes,
//! k-nearest neighbours, a linear SVM, and gradient-boosted regression trees.
//!
//! Every learner takes a dense matrix and class indices into an ordered label
//! space, and predicts one score per class per row.

mod gbm;
mod knn;
mod nb;
mod persist;
mod svm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::DenseMatrix;

pub use gbm::{best_split, fit_gbm, Gbm, GbmConfig, GbmLoss, Node, RegressionTree, Split};
pub use knn::{Knn, Metric};
pub use nb::{GaussianNb, MultinomialNb};
pub use persist::MODEL_FORMAT_VERSION;
pub use svm::{hinge_objective, hinge_subgradient, LinearSvm, SvmConfig};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("class `{0}` has no training samples")]
    EmptyClass(String),
    #[error("negative feature value at row {row}, column {col}")]
    NegativeFeature { row: usize, col: usize },
    #[error("k = {k} exceeds the {n} training rows")]
    KTooLarge { k: usize, n: usize },
    #[error("dimension mismatch: model expects {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("label index {index} outside a label space of {size}")]
    LabelOutOfRange { index: usize, size: usize },
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value during training")]
    NonFinite,
    #[error("model file: {0}")]
    Persist(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NbMultinomial,
    NbGaussian,
    Knn,
    LinearSvm,
    Gbm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::NbMultinomial => "nb_multinomial",
            ModelKind::NbGaussian => "nb_gaussian",
            ModelKind::Knn => "knn",
            ModelKind::LinearSvm => "linear_svm",
            ModelKind::Gbm => "gbm",
        }
    }
}

/// Which learner to fit and with what settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerConfig {
    NbMultinomial { alpha: f64 },
    NbGaussian,
    Knn { k: usize, metric: Metric },
    LinearSvm(SvmConfig),
    Gbm(GbmConfig),
}

impl LearnerConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            LearnerConfig::NbMultinomial { .. } => ModelKind::NbMultinomial,
            LearnerConfig::NbGaussian => ModelKind::NbGaussian,
            LearnerConfig::Knn { .. } => ModelKind::Knn,
            LearnerConfig::LinearSvm(_) => ModelKind::LinearSvm,
            LearnerConfig::Gbm(_) => ModelKind::Gbm,
        }
    }

    /// Default settings for a learner kind.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::NbMultinomial => LearnerConfig::NbMultinomial { alpha: 1.0 },
            ModelKind::NbGaussian => LearnerConfig::NbGaussian,
            ModelKind::Knn => LearnerConfig::Knn {
                k: 5,
                metric: Metric::Euclidean,
            },
            ModelKind::LinearSvm => LearnerConfig::LinearSvm(SvmConfig::default()),
            ModelKind::Gbm => LearnerConfig::Gbm(GbmConfig::default()),
        }
    }

    /// The seed used by stochastic learners, if any.
    pub fn seed(&self) -> Option<u64> {
        match self {
            LearnerConfig::LinearSvm(c) => Some(c.seed),
            LearnerConfig::Gbm(c) => Some(c.seed),
            _ => None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            LearnerConfig::LinearSvm(c) => c.seed = seed,
            LearnerConfig::Gbm(c) => c.seed = seed,
            _ => {}
        }
        self
    }

    /// Multinomial NB rejects negative inputs, so standardized features
    /// cannot feed it.
    pub fn requires_nonnegative(&self) -> bool {
        matches!(self, LearnerConfig::NbMultinomial { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    NbMultinomial(MultinomialNb),
    NbGaussian(GaussianNb),
    Knn(Knn),
    LinearSvm(LinearSvm),
    Gbm(Gbm),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: Option<u64>,
    pub corpus_hash: Option<String>,
    pub n_samples: usize,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub label_space: Vec<String>,
    pub params: ModelParams,
    /// Feature spec notation the model was trained on, when known.
    pub feature_spec: Option<String>,
    pub metadata: TrainingMetadata,
}

/// Predicted class indices and the per-class scores they were taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub labels: Vec<usize>,
    pub scores: DenseMatrix,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::NbMultinomial(_) => ModelKind::NbMultinomial,
            ModelParams::NbGaussian(_) => ModelKind::NbGaussian,
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::LinearSvm(_) => ModelKind::LinearSvm,
            ModelParams::Gbm(_) => ModelKind::Gbm,
        }
    }

    pub fn n_features(&self) -> usize {
        match &self.params {
            ModelParams::NbMultinomial(m) => m.n_features(),
            ModelParams::NbGaussian(m) => m.n_features(),
            ModelParams::Knn(m) => m.n_features(),
            ModelParams::LinearSvm(m) => m.n_features(),
            ModelParams::Gbm(m) => m.n_features(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.label_space.len()
    }

    fn row_scores(&self, row: &[f64]) -> Vec<f64> {
        match &self.params {
            ModelParams::NbMultinomial(m) => m.predict_proba(row),
            ModelParams::NbGaussian(m) => m.predict_proba(row),
            ModelParams::Knn(m) => m.vote_fractions(row),
            ModelParams::LinearSvm(m) => m.scores(row),
            ModelParams::Gbm(m) => m.predict_proba(row),
        }
    }

    /// Per-class scores and argmax labels for every row. Ties go to the lower
    /// class index.
    pub fn predict(&self, x: &DenseMatrix) -> Result<Predictions, ClassifyError> {
        if x.cols() != self.n_features() {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.n_features(),
                actual: x.cols(),
            });
        }
        if let ModelParams::NbMultinomial(_) = self.params {
            check_nonnegative(x)?;
        }
        let c = self.n_classes();
        let mut scores = DenseMatrix::zeros(x.rows(), c);
        let mut labels = Vec::with_capacity(x.rows());
        for (i, row) in x.iter_rows().enumerate() {
            let s = self.row_scores(row);
            labels.push(argmax(&s));
            scores.row_mut(i).copy_from_slice(&s);
        }
        Ok(Predictions { labels, scores })
    }
}

/// Fits the configured learner. `y` holds indices into `label_space`, and
/// every class in the label space must occur at least once.
pub fn train(
    config: &LearnerConfig,
    x: &DenseMatrix,
    y: &[usize],
    label_space: &[String],
) -> Result<TrainedModel, ClassifyError> {
    let n_classes = label_space.len();
    check_training_set(x, y, label_space)?;
    let params = match config {
        LearnerConfig::NbMultinomial { alpha } => {
            ModelParams::NbMultinomial(MultinomialNb::fit(x, y, n_classes, *alpha)?)
        }
        LearnerConfig::NbGaussian => ModelParams::NbGaussian(GaussianNb::fit(x, y, n_classes)),
        LearnerConfig::Knn { k, metric } => ModelParams::Knn(Knn::fit(x, y, n_classes, *k, *metric)?),
        LearnerConfig::LinearSvm(c) => ModelParams::LinearSvm(LinearSvm::fit(x, y, n_classes, c)?),
        LearnerConfig::Gbm(c) => ModelParams::Gbm(fit_gbm(x, y, n_classes, c)?.0),
    };
    Ok(TrainedModel {
        label_space: label_space.to_vec(),
        params,
        feature_spec: None,
        metadata: TrainingMetadata {
            seed: config.seed(),
            corpus_hash: None,
            n_samples: x.rows(),
            n_features: x.cols(),
        },
    })
}

fn check_training_set(x: &DenseMatrix, y: &[usize], label_space: &[String]) -> Result<(), ClassifyError> {
    if x.rows() != y.len() {
        return Err(ClassifyError::LengthMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    if y.is_empty() {
        return Err(ClassifyError::EmptyTrainingSet);
    }
    let mut counts = vec![0usize; label_space.len()];
    for &label in y {
        *counts.get_mut(label).ok_or(ClassifyError::LabelOutOfRange {
            index: label,
            size: label_space.len(),
        })? += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(ClassifyError::SingleClass);
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(ClassifyError::EmptyClass(label_space[empty].clone()));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(ClassifyError::NonFinite);
    }
    Ok(())
}

fn check_nonnegative(x: &DenseMatrix) -> Result<(), ClassifyError> {
    for (row, values) in x.iter_rows().enumerate() {
        if let Some(col) = values.iter().position(|&v| v < 0.0) {
            return Err(ClassifyError::NegativeFeature { row, col });
        }
    }
    Ok(())
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax of log-scores, shifted by the maximum for stability.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
