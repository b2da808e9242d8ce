//! Confusion matrices, binary and multi-class metrics, repeated
//! cross-validation, transfer evaluation, and report rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{self, ClassifyError, LearnerConfig, TrainedModel};
use crate::corpus::{Corpus, CorpusError, FoldPlan, HarassmentType, Label, LabeledTweet};
use crate::text::TokenStream;
use crate::vectorize::{corpus_streams, fit_tfidf, Block, FeaturePipeline, FeatureSpec, Norm, Resources, VectorizeError};

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("label index {index} outside a label space of {size}")]
    UnknownLabel { index: usize, size: usize },
    #[error("label `{0}` is not in the model's label space")]
    UnknownLabelName(String),
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("binary metrics need a 2x2 confusion matrix, got {0}x{0}")]
    NotBinary(usize),
    #[error("fold plan covers {plan} items but the corpus has {corpus}")]
    FoldMismatch { plan: usize, corpus: usize },
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// `counts[t][p]`: samples of true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub label_space: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(label_space: Vec<String>) -> Self {
        let c = label_space.len();
        ConfusionMatrix {
            label_space,
            counts: vec![vec![0; c]; c],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.label_space.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    /// Element-wise sum; both matrices must share a label space.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.label_space, other.label_space, "label spaces differ");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// `(tp, fp, fn)` of class `c` against the rest.
    pub fn one_vs_rest(&self, c: usize) -> (u64, u64, u64) {
        let tp = self.counts[c][c];
        let predicted: u64 = self.counts.iter().map(|row| row[c]).sum();
        let actual: u64 = self.counts[c].iter().sum();
        (tp, predicted - tp, actual - tp)
    }
}

pub fn confusion(
    truth: &[usize],
    predicted: &[usize],
    label_space: &[String],
) -> Result<ConfusionMatrix, EvaluateError> {
    if truth.len() != predicted.len() {
        return Err(EvaluateError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    let size = label_space.len();
    let mut cm = ConfusionMatrix::new(label_space.to_vec());
    for (&t, &p) in truth.iter().zip(predicted) {
        if let Some(&index) = [t, p].iter().find(|&&i| i >= size) {
            return Err(EvaluateError::UnknownLabel { index, size });
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averaged {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// Metrics for one evaluation. Binary reports carry the positive class only
/// plus specificity; multi-class reports carry every class plus micro and
/// macro averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub specificity: Option<f64>,
    pub micro: Option<Averaged>,
    #[serde(rename = "macro")]
    pub macro_avg: Option<Averaged>,
    /// Rates that were 0/0 and reported as 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MetricsReport {
    /// The headline F-score: the positive class for binary reports, macro F
    /// otherwise.
    pub fn f_score(&self) -> f64 {
        match (self.specificity, self.macro_avg) {
            (Some(_), _) | (_, None) => self.per_class.first().map_or(0.0, |c| c.f_score),
            (None, Some(m)) => m.f_score,
        }
    }
}

fn ratio(num: u64, den: u64, what: &str, warnings: &mut Vec<String>) -> f64 {
    if den == 0 {
        warnings.push(format!("{what} is 0/0, reported as 0"));
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else if p == r {
        // 2p²/2p can round away from p
        p
    } else {
        2.0 * p * r / (p + r)
    }
}

fn class_metrics(cm: &ConfusionMatrix, c: usize, warnings: &mut Vec<String>) -> ClassMetrics {
    let (tp, fp, fn_) = cm.one_vs_rest(c);
    let label = &cm.label_space[c];
    let precision = ratio(tp, tp + fp, &format!("precision of `{label}`"), warnings);
    let recall = ratio(tp, tp + fn_, &format!("recall of `{label}`"), warnings);
    ClassMetrics {
        label: label.clone(),
        precision,
        recall,
        f_score: harmonic(precision, recall),
        support: tp + fn_,
    }
}

pub fn binary_metrics(cm: &ConfusionMatrix, positive: usize) -> Result<MetricsReport, EvaluateError> {
    if cm.n_classes() != 2 {
        return Err(EvaluateError::NotBinary(cm.n_classes()));
    }
    if positive > 1 {
        return Err(EvaluateError::UnknownLabel { index: positive, size: 2 });
    }
    let negative = 1 - positive;
    let mut warnings = Vec::new();
    let pos = class_metrics(cm, positive, &mut warnings);
    let tn = cm.counts[negative][negative];
    let fp = cm.counts[negative][positive];
    let specificity = ratio(tn, tn + fp, "specificity", &mut warnings);
    let accuracy = ratio(cm.correct(), cm.total(), "accuracy", &mut warnings);
    Ok(MetricsReport {
        per_class: vec![pos],
        accuracy,
        specificity: Some(specificity),
        micro: None,
        macro_avg: None,
        warnings,
    })
}

pub fn multiclass_metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let mut warnings = Vec::new();
    let per_class: Vec<ClassMetrics> = (0..cm.n_classes())
        .map(|c| class_metrics(cm, c, &mut warnings))
        .collect();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for c in 0..cm.n_classes() {
        let (a, b, d) = cm.one_vs_rest(c);
        tp += a;
        fp += b;
        fn_ += d;
    }
    let micro_p = ratio(tp, tp + fp, "micro precision", &mut warnings);
    let micro_r = ratio(tp, tp + fn_, "micro recall", &mut warnings);
    let n = per_class.len().max(1) as f64;
    let macro_avg = Averaged {
        precision: per_class.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: per_class.iter().map(|m| m.recall).sum::<f64>() / n,
        f_score: per_class.iter().map(|m| m.f_score).sum::<f64>() / n,
    };
    MetricsReport {
        per_class,
        accuracy: ratio(cm.correct(), cm.total(), "accuracy", &mut warnings),
        specificity: None,
        micro: Some(Averaged {
            precision: micro_p,
            recall: micro_r,
            f_score: harmonic(micro_p, micro_r),
        }),
        macro_avg: Some(macro_avg),
        warnings,
    }
}

/// Binary metrics when a positive class is given, multi-class otherwise.
pub fn metrics_for(cm: &ConfusionMatrix, positive: Option<usize>) -> Result<MetricsReport, EvaluateError> {
    match positive {
        Some(p) => binary_metrics(cm, p),
        None => Ok(multiclass_metrics(cm)),
    }
}

/// Applies `f` to each metric across same-shaped reports.
fn combine(reports: &[&MetricsReport], f: impl Fn(&[f64]) -> f64) -> MetricsReport {
    let first = reports[0];
    let pick = |g: &dyn Fn(&MetricsReport) -> f64| f(&reports.iter().map(|r| g(r)).collect::<Vec<_>>());
    let per_class = (0..first.per_class.len())
        .map(|c| ClassMetrics {
            label: first.per_class[c].label.clone(),
            precision: pick(&|r| r.per_class[c].precision),
            recall: pick(&|r| r.per_class[c].recall),
            f_score: pick(&|r| r.per_class[c].f_score),
            support: reports.iter().map(|r| r.per_class[c].support).sum(),
        })
        .collect();
    let avg = |g: &dyn Fn(&MetricsReport) -> Option<Averaged>| {
        g(first).map(|_| Averaged {
            precision: pick(&|r| g(r).map_or(0.0, |a| a.precision)),
            recall: pick(&|r| g(r).map_or(0.0, |a| a.recall)),
            f_score: pick(&|r| g(r).map_or(0.0, |a| a.f_score)),
        })
    };
    MetricsReport {
        per_class,
        accuracy: pick(&|r| r.accuracy),
        specificity: first.specificity.map(|_| pick(&|r| r.specificity.unwrap_or(0.0))),
        micro: avg(&|r| r.micro),
        macro_avg: avg(&|r| r.macro_avg),
        warnings: Vec::new(),
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// The classification task a corpus is turned into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Harassing vs non-harassing.
    Binary,
    /// The five harassment types plus non-harassing.
    MultiClass,
}

impl Task {
    pub fn label_space(self) -> Vec<String> {
        match self {
            Task::Binary => vec![Label::NonHarassing.name().to_string(), Label::Harassing.name().to_string()],
            Task::MultiClass => HarassmentType::ALL
                .iter()
                .map(|t| t.name().to_string())
                .chain(std::iter::once(Label::NonHarassing.name().to_string()))
                .collect(),
        }
    }

    /// Index of the positive class for binary metrics.
    pub fn positive(self) -> Option<usize> {
        match self {
            Task::Binary => Some(1),
            Task::MultiClass => None,
        }
    }

    pub fn label_of(self, tweet: &LabeledTweet) -> usize {
        match self {
            Task::Binary => usize::from(tweet.is_harassing()),
            Task::MultiClass if tweet.is_harassing() => HarassmentType::ALL
                .iter()
                .position(|&t| t == tweet.harassment_type)
                .expect("type in ALL"),
            Task::MultiClass => HarassmentType::ALL.len(),
        }
    }

    pub fn labels(self, corpus: &Corpus) -> Vec<usize> {
        corpus.iter().map(|t| self.label_of(t)).collect()
    }

    /// The task whose label space equals `label_space`.
    pub fn from_label_space(label_space: &[String]) -> Option<Task> {
        [Task::Binary, Task::MultiClass]
            .into_iter()
            .find(|t| t.label_space() == label_space)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub repeat: usize,
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    /// Mean of per-fold metrics, or metrics of the pooled confusion matrix
    /// when `pooled` is set.
    pub aggregate: MetricsReport,
    /// Sample standard deviation of per-fold metrics.
    pub std: MetricsReport,
    pub pooled: bool,
    pub pooled_confusion: ConfusionMatrix,
}

/// Runs `fit_predict(train, test)` on every fold of the plan, in
/// `(repeat, fold)` order, and scores its predictions for the test items.
pub fn cross_validate_with<F>(
    labels: &[usize],
    label_space: &[String],
    positive: Option<usize>,
    folds: &FoldPlan,
    pooled: bool,
    mut fit_predict: F,
) -> Result<CvReport, EvaluateError>
where
    F: FnMut(&[usize], &[usize]) -> Result<Vec<usize>, EvaluateError>,
{
    if folds.n_items() != labels.len() {
        return Err(EvaluateError::FoldMismatch {
            plan: folds.n_items(),
            corpus: labels.len(),
        });
    }
    let mut reports = Vec::with_capacity(folds.repeats * folds.k);
    let mut pooled_cm = ConfusionMatrix::new(label_space.to_vec());
    for repeat in 0..folds.repeats {
        for fold in 0..folds.k {
            let (train, test) = folds.split(repeat, fold);
            let predicted = fit_predict(&train, &test)?;
            let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
            let cm = confusion(&truth, &predicted, label_space)?;
            pooled_cm.merge(&cm);
            reports.push(FoldReport {
                repeat,
                fold,
                train_size: train.len(),
                test_size: test.len(),
                metrics: metrics_for(&cm, positive)?,
                confusion: cm,
            });
        }
    }
    let refs: Vec<&MetricsReport> = reports.iter().map(|r| &r.metrics).collect();
    let aggregate = if pooled {
        metrics_for(&pooled_cm, positive)?
    } else {
        combine(&refs, mean)
    };
    Ok(CvReport {
        std: combine(&refs, sample_std),
        aggregate,
        folds: reports,
        pooled,
        pooled_confusion: pooled_cm,
    })
}

/// Fits the feature pipeline on the training documents only, TFIDF included.
pub fn fit_features(
    spec: &FeatureSpec,
    docs: &[TokenStream],
    resources: &Resources,
) -> Result<(FeaturePipeline, crate::vectorize::FeatureMatrix), VectorizeError> {
    let tfidf = if spec.contains(Block::Tfidf) {
        Some(fit_tfidf(docs, Norm::L2)?)
    } else {
        None
    };
    FeaturePipeline::fit(spec, docs, tfidf, resources)
}

/// Vectorizes, trains, and predicts on every fold; all fitting sees only the
/// fold's training tweets.
pub fn cross_validate(
    corpus: &Corpus,
    task: Task,
    spec: &FeatureSpec,
    resources: &Resources,
    learner: &LearnerConfig,
    folds: &FoldPlan,
    pooled: bool,
) -> Result<CvReport, EvaluateError> {
    let docs = corpus_streams(corpus);
    let labels = task.labels(corpus);
    let label_space = task.label_space();
    cross_validate_with(&labels, &label_space, task.positive(), folds, pooled, |train, test| {
        let train_docs: Vec<TokenStream> = train.iter().map(|&i| docs[i].clone()).collect();
        let test_docs: Vec<TokenStream> = test.iter().map(|&i| docs[i].clone()).collect();
        let (pipeline, train_x) = fit_features(spec, &train_docs, resources)?;
        let test_x = pipeline.transform(&test_docs, resources)?;
        let train_y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let model = classify::train(learner, &train_x.matrix, &train_y, &label_space)?;
        Ok(model.predict(&test_x.matrix)?.labels)
    })
}

/// Trains on the whole corpus and returns the model with its fitted features.
pub fn train_model(
    corpus: &Corpus,
    task: Task,
    spec: &FeatureSpec,
    resources: &Resources,
    learner: &LearnerConfig,
) -> Result<(TrainedModel, FeaturePipeline), EvaluateError> {
    let docs = corpus_streams(corpus);
    let (pipeline, x) = fit_features(spec, &docs, resources)?;
    let mut model = classify::train(learner, &x.matrix, &task.labels(corpus), &task.label_space())?;
    model.feature_spec = Some(spec.to_string());
    model.metadata.corpus_hash = Some(corpus.content_hash());
    Ok((model, pipeline))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub label: String,
    pub predicted: u64,
    /// Percentage of all predictions that fall in a harassing class.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    pub proportions: Vec<Proportion>,
    pub predictions: Vec<usize>,
}

/// Scores a trained model on an external corpus using the model's own fitted
/// feature pipeline; nothing is refitted.
pub fn transfer_evaluate(
    model: &TrainedModel,
    pipeline: &FeaturePipeline,
    external: &Corpus,
    resources: &Resources,
) -> Result<TransferReport, EvaluateError> {
    let task = Task::from_label_space(&model.label_space).ok_or_else(|| {
        EvaluateError::UnknownLabelName(model.label_space.join(","))
    })?;
    let x = pipeline.transform(&corpus_streams(external), resources)?;
    let predictions = model.predict(&x.matrix)?.labels;
    let truth = task.labels(external);
    let cm = confusion(&truth, &predictions, &model.label_space)?;
    let metrics = metrics_for(&cm, task.positive())?;
    let nonharassing = Label::NonHarassing.name();
    let harassing: Vec<usize> = (0..model.label_space.len())
        .filter(|&c| model.label_space[c] != nonharassing)
        .collect();
    let harassing_total = predictions.iter().filter(|p| harassing.contains(p)).count() as u64;
    let proportions = harassing
        .iter()
        .map(|&c| {
            let predicted = predictions.iter().filter(|&&p| p == c).count() as u64;
            Proportion {
                label: model.label_space[c].clone(),
                predicted,
                percent: if harassing_total == 0 {
                    0.0
                } else {
                    100.0 * predicted as f64 / harassing_total as f64
                },
            }
        })
        .collect();
    Ok(TransferReport {
        confusion: cm,
        metrics,
        proportions,
        predictions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 5] = ["Precision", "Recall", "F-Score", "Accuracy", "Specificity"];

struct Row {
    name: String,
    values: [Option<f64>; 5],
}

fn report_rows(report: &MetricsReport, row_name: &str) -> Vec<Row> {
    if report.specificity.is_some() {
        return report
            .per_class
            .iter()
            .map(|c| Row {
                name: row_name.to_string(),
                values: [
                    Some(c.precision),
                    Some(c.recall),
                    Some(c.f_score),
                    Some(report.accuracy),
                    report.specificity,
                ],
            })
            .collect();
    }
    let mut rows: Vec<Row> = report
        .per_class
        .iter()
        .map(|c| Row {
            name: c.label.clone(),
            values: [Some(c.precision), Some(c.recall), Some(c.f_score), None, None],
        })
        .collect();
    for (name, avg) in [("Micro", report.micro), ("Macro", report.macro_avg)] {
        if let Some(a) = avg {
            let accuracy = (name == "Micro").then_some(report.accuracy);
            rows.push(Row {
                name: name.to_string(),
                values: [Some(a.precision), Some(a.recall), Some(a.f_score), accuracy, None],
            });
        }
    }
    rows
}

/// Renders a metrics table. Binary reports give one row named `row_name`;
/// multi-class reports give one row per class followed by micro and macro
/// rows. Markdown rounds to two decimals, CSV keeps full precision. Absent
/// values are left blank. `std`, when given, adds a `±` spread in markdown
/// and `_std` columns in CSV.
pub fn emit_report(report: &MetricsReport, std: Option<&MetricsReport>, row_name: &str, format: ReportFormat) -> String {
    let rows = report_rows(report, row_name);
    let std_rows = std.map(|s| report_rows(s, row_name));
    let first = if report.specificity.is_some() { "Features" } else { "Class" };
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            let mut header = vec![first.to_string()];
            header.extend(REPORT_COLUMNS.iter().map(|c| c.to_string()));
            if std_rows.is_some() {
                header.extend(REPORT_COLUMNS.iter().map(|c| format!("{c}_std")));
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header).expect("write to memory");
            for (i, row) in rows.iter().enumerate() {
                let mut record = vec![row.name.clone()];
                let cell = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
                record.extend(row.values.iter().map(|&v| cell(v)));
                if let Some(s) = &std_rows {
                    record.extend(s[i].values.iter().map(|&v| cell(v)));
                }
                w.write_record(&record).expect("write to memory");
            }
            out = String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8");
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| {first} | {} |", REPORT_COLUMNS.join(" | "));
            let _ = writeln!(out, "|---|{}", "---:|".repeat(REPORT_COLUMNS.len()));
            for (i, row) in rows.iter().enumerate() {
                let cells: Vec<String> = row
                    .values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| match (v, std_rows.as_ref().and_then(|s| s[i].values[j])) {
                        (Some(x), Some(s)) => format!("{x:.2} ± {s:.2}"),
                        (Some(x), None) => format!("{x:.2}"),
                        (None, _) => String::new(),
                    })
                    .collect();
                let _ = writeln!(out, "| {} | {} |", row.name, cells.join(" | "));
            }
        }
    }
    out
}

/// Renders a transfer evaluation's proportion table.
pub fn emit_proportions(report: &TransferReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str("Class,Predicted,Proportion\n");
            for p in &report.proportions {
                let _ = writeln!(out, "{},{},{}", p.label, p.predicted, p.percent);
            }
        }
        ReportFormat::Markdown => {
            out.push_str("| Class | Predicted | Proportion |\n|---|---:|---:|\n");
            for p in &report.proportions {
                let _ = writeln!(out, "| {} | {} | {:.2}% |", p.label, p.predicted, p.percent);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    fn binary_cm(tp: u64, fn_: u64, fp: u64, tn: u64) -> ConfusionMatrix {
        ConfusionMatrix {
            label_space: space(2),
            counts: vec![vec![tn, fp], vec![fn_, tp]],
        }
    }

    #[test]
    fn binary_example() {
        let r = binary_metrics(&binary_cm(50, 10, 5, 35), 1).unwrap();
        let c = &r.per_class[0];
        assert!((c.precision - 50.0 / 55.0).abs() < 1e-12);
        assert!((c.recall - 50.0 / 60.0).abs() < 1e-12);
        assert!((c.f_score - 0.8695652173913043).abs() < 1e-12);
        assert_eq!(r.specificity, Some(0.875));
        assert_eq!(r.accuracy, 0.85);
        assert_eq!(format!("{:.4} {:.4} {:.4}", c.precision, c.recall, c.f_score), "0.9091 0.8333 0.8696");
    }

    #[test]
    fn no_predicted_positives() {
        let r = binary_metrics(&binary_cm(0, 10, 0, 30), 1).unwrap();
        assert_eq!(r.per_class[0].precision, 0.0);
        assert_eq!(r.specificity, Some(1.0));
        assert!(r.warnings.iter().any(|w| w.contains("precision")));
        assert!(matches!(
            binary_metrics(&ConfusionMatrix::new(space(3)), 1),
            Err(EvaluateError::NotBinary(3))
        ));
    }

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[0, 1, 2, 0, 1, 2], &[0, 2, 2, 1, 1, 0], &space(3)).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]);
        let all_zero = confusion(&[0, 1, 2], &[0, 0, 0], &space(3)).unwrap();
        assert!(all_zero.counts.iter().all(|r| r[1] == 0 && r[2] == 0));
        assert!(matches!(
            confusion(&[0, 3], &[0, 0], &space(3)),
            Err(EvaluateError::UnknownLabel { index: 3, size: 3 })
        ));
        assert!(matches!(confusion(&[0], &[], &space(3)), Err(EvaluateError::LengthMismatch { .. })));
    }

    #[test]
    fn diagonal_is_perfect() {
        let cm = confusion(&[0, 1, 2, 2], &[0, 1, 2, 2], &space(3)).unwrap();
        let r = multiclass_metrics(&cm);
        assert_eq!(r.macro_avg.unwrap().f_score, 1.0);
        assert_eq!(r.micro.unwrap().f_score, 1.0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = MetricsReport {
            per_class: Vec::new(),
            accuracy: 0.0,
            specificity: None,
            micro: None,
            macro_avg: None,
            warnings: Vec::new(),
        };
        let md = emit_report(&r, None, "x", ReportFormat::Markdown);
        assert_eq!(md.lines().count(), 2);
        let csv = emit_report(&r, None, "x", ReportFormat::Csv);
        assert_eq!(csv, "Class,Precision,Recall,F-Score,Accuracy,Specificity\n");
    }

    #[test]
    fn binary_report_layout() {
        let r = binary_metrics(&binary_cm(50, 10, 5, 35), 1).unwrap();
        let md = emit_report(&r, None, "F(S)+W(S)", ReportFormat::Markdown);
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], "| Features | Precision | Recall | F-Score | Accuracy | Specificity |");
        assert_eq!(lines[2], "| F(S)+W(S) | 0.91 | 0.83 | 0.87 | 0.85 | 0.88 |");
        let csv = emit_report(&r, None, "T", ReportFormat::Csv);
        assert!(csv.lines().nth(1).unwrap().starts_with("T,0.9090909090909091,"));
    }

    #[test]
    fn multiclass_report_layout() {
        let cm = confusion(&[0, 1, 2, 0], &[0, 1, 2, 1], &space(3)).unwrap();
        let md = emit_report(&multiclass_metrics(&cm), None, "", ReportFormat::Markdown);
        let names: Vec<&str> = md
            .lines()
            .skip(2)
            .map(|l| l.split('|').nth(1).unwrap().trim())
            .collect();
        assert_eq!(names, ["c0", "c1", "c2", "Micro", "Macro"]);
    }

    #[test]
    fn majority_predictor_on_balanced_corpus() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let folds = crate::corpus::make_folds_stratified(&labels, 10, 5, 3).unwrap();
        let report = cross_validate_with(&labels, &space(2), Some(1), &folds, false, |_, test| {
            Ok(vec![0; test.len()])
        })
        .unwrap();
        assert_eq!(report.folds.len(), 50);
        assert!((report.aggregate.accuracy - 0.5).abs() < 1e-12);
        let mean_acc = report.folds.iter().map(|f| f.metrics.accuracy).sum::<f64>() / 50.0;
        assert!((report.aggregate.accuracy - mean_acc).abs() < 1e-12);
        assert_eq!(report.pooled_confusion.total(), 500);
    }
}
