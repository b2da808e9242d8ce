use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "hartype",
    version,
    about = "Type-aware harassment corpus analysis and classification"
)]
pub struct Cli {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed for sampling, fold assignment, and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory (created if missing).
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Per-type annotated / harassing / non-harassing counts.
    Stats(CorpusArgs),
    /// Cohen's kappa between annotator vote positions, per type.
    Kappa(CorpusArgs),
    /// Effect sizes of lexicon categories and frequent words per sub-corpus.
    Analyze(AnalyzeArgs),
    /// Most frequent words of one sub-corpus.
    Freq(FreqArgs),
    /// Train word or subword embeddings on a sentence file.
    EmbedTrain(EmbedArgs),
    /// 2-D PCA coordinates of selected embedding vectors.
    Project2d(ProjectArgs),
    /// Build a feature matrix for a corpus.
    Vectorize(VectorizeArgs),
    /// Train a classifier on the whole (sampled) corpus.
    Train(TrainArgs),
    /// Repeated stratified cross-validation.
    Cv(CvArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Score a saved model on an external corpus.
    Transfer(TransferArgs),
    /// Re-render a saved cross-validation or transfer result.
    Report(ReportArgs),
}

#[derive(Args, Debug, Default)]
pub struct CorpusArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Keep categories with |effect size| above this in at least one column.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub stoplist: Option<PathBuf>,
    /// Number of frequent words per sub-corpus.
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct FreqArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Restrict to one harassment type.
    #[arg(long = "type")]
    pub harassment_type: Option<String>,
    /// Restrict to `harassing` or `nonharassing`.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub stoplist: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct EmbedArgs {
    /// One sentence per line.
    #[arg(long)]
    pub sentences: Option<PathBuf>,
    /// File name of the embedding table inside the output directory.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub min_count: Option<u64>,
    /// `skipgram` or `cbow`.
    #[arg(long)]
    pub mode: Option<String>,
    /// `word` or `subword`.
    #[arg(long)]
    pub level: Option<String>,
    #[arg(long)]
    pub ngram_min: Option<usize>,
    #[arg(long)]
    pub ngram_max: Option<usize>,
    #[arg(long)]
    pub buckets: Option<u32>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct ProjectArgs {
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Tokens to project; defaults to the most frequent vocabulary entries.
    #[arg(long, value_delimiter = ',')]
    pub tokens: Vec<String>,
    /// Number of vocabulary entries when no tokens are given.
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct FeatureArgs {
    /// Feature spec such as `F(S)+W(S)` or `T+L`.
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Embedding table for a block, as `BLOCK=PATH` (e.g. `W(S)=ws.vec`).
    #[arg(long = "embedding", value_name = "BLOCK=PATH")]
    pub embeddings: Vec<String>,
    /// `mean` or `concat_pad:<L>`.
    #[arg(long)]
    pub composition: Option<String>,
    /// Skip per-block standardization.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Args, Debug, Default)]
pub struct LearnerArgs {
    /// `gbm`, `nb_multinomial`, `nb_gaussian`, `knn` or `linear_svm`.
    #[arg(long)]
    pub learner: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub subsample: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_samples_split: Option<usize>,
    #[arg(long)]
    pub min_samples_leaf: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub svm_epochs: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct TaskArgs {
    /// `combined` (binary on the balanced corpus), `per-type` (one binary
    /// task per harassment type) or `multiclass`.
    #[arg(long)]
    pub task: Option<String>,
    /// Size of the non-harassing class in multi-class runs.
    #[arg(long)]
    pub nonharassing_size: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub learner: LearnerArgs,
    #[command(flatten)]
    pub task: TaskArgs,
}

#[derive(Args, Debug, Default)]
pub struct CvArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Aggregate by pooling fold confusion matrices instead of averaging.
    #[arg(long)]
    pub pooled: bool,
    /// `markdown` or `csv`.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct VectorizeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// `csv` or `binary`.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct PredictArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long = "embedding", value_name = "BLOCK=PATH")]
    pub embeddings: Vec<String>,
}

#[derive(Args, Debug, Default)]
pub struct TransferArgs {
    #[command(flatten)]
    pub predict: PredictArgs,
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct ReportArgs {
    /// A `cv_*.json` or `transfer.json` file written by `cv` or `transfer`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
}
