use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hartype::classify::{GbmConfig, LearnerConfig, Metric, ModelKind, SvmConfig, TrainedModel};
use hartype::corpus::{
    balanced_undersample, cohen_kappa, filter_by_type, load_corpus, load_votes, make_folds_stratified,
    multiclass_sample, write_corpus, Corpus, CorpusFormat, HarassmentType, Label,
};
use hartype::embeddings::{
    project_2d, sidecar_path, train_with_report, Composition, EmbeddingConfig, EmbeddingTable, Level, TrainMode,
};
use hartype::evaluate::{
    cross_validate, emit_proportions, emit_report, train_model, transfer_evaluate, CvReport, ReportFormat, Task,
    TransferReport,
};
use hartype::lexicon::{effect_size_table, frequent_words, load_lexicon, parse_stoplist, StdKind, TypeColumn};
use hartype::rng;
use hartype::text::tokenize_stream;
use hartype::vectorize::{build_features, corpus_streams, Block, FeaturePipeline, FeatureSpec, Resources};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::*;
use crate::config::{existing, pick, require, FileConfig};
use crate::error::CliError;
use crate::output::{OutputDir, RunManifest};

const DEFAULT_SEED: u64 = 1;
const SAMPLE_STREAM: u64 = 0;
const FOLD_STREAM: u64 = 1;
const LEARNER_STREAM: u64 = 2;

pub struct Ctx {
    pub file: FileConfig,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Ctx {
    pub fn new(cli_seed: Option<u64>, cli_out: Option<PathBuf>, file: FileConfig) -> Self {
        let seed = pick(cli_seed, file.seed).unwrap_or(DEFAULT_SEED);
        let out = pick(cli_out, file.paths.output.clone());
        Ctx { file, seed, out }
    }

    fn out_dir(&self) -> Result<Option<OutputDir>, CliError> {
        self.out.as_deref().map(OutputDir::open).transpose()
    }

    fn require_out(&self) -> Result<OutputDir, CliError> {
        let out = require(self.out.as_deref(), "out (output directory)")?;
        OutputDir::open(out)
    }

    fn corpus_path(&self, args: &CorpusArgs) -> Result<PathBuf, CliError> {
        let path = require(pick(args.corpus.clone(), self.file.paths.corpus.clone()), "corpus")?;
        existing(path, "corpus")
    }

    fn stoplist(&self, cli: &Option<PathBuf>) -> Result<Option<(PathBuf, std::collections::HashSet<String>)>, CliError> {
        match pick(cli.clone(), self.file.paths.stoplist.clone()) {
            None => Ok(None),
            Some(p) => {
                let p = existing(p, "stoplist")?;
                let text = std::fs::read_to_string(&p)?;
                Ok(Some((p, parse_stoplist(&text))))
            }
        }
    }
}

fn format_of(cli: &Option<String>, file: &Option<String>) -> Result<ReportFormat, CliError> {
    pick(cli.clone(), file.clone())
        .map_or(Ok(ReportFormat::Markdown), |f| f.parse().map_err(CliError::config))
}

fn extension(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Csv => "csv",
        ReportFormat::Markdown => "md",
    }
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for r in rows {
        w.write_record(r).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

// ---------------------------------------------------------------- stats

pub fn stats(ctx: &Ctx, args: &CorpusArgs) -> Result<(), CliError> {
    let path = ctx.corpus_path(args)?;
    let corpus = load_corpus(&path, None)?;
    let mut rows = Vec::new();
    for t in HarassmentType::ALL {
        rows.push(vec![
            t.title().to_string(),
            corpus.count(Some(t), None).to_string(),
            corpus.count(Some(t), Some(Label::Harassing)).to_string(),
            corpus.count(Some(t), Some(Label::NonHarassing)).to_string(),
        ]);
    }
    rows.push(vec![
        "Combined".to_string(),
        corpus.len().to_string(),
        corpus.count(None, Some(Label::Harassing)).to_string(),
        corpus.count(None, Some(Label::NonHarassing)).to_string(),
    ]);
    let header = ["Contextual Type", "Annotated Tweets", "Harassing", "Non-Harassing"];
    let mut md = format!("| {} |\n|---|---:|---:|---:|\n", header.join(" | "));
    for r in &rows {
        let _ = writeln!(md, "| {} |", r.join(" | "));
    }
    print!("{md}");
    if let Some(mut out) = ctx.out_dir()? {
        out.write("stats.csv", &csv_bytes(&header, &rows))?;
        out.write("stats.md", md.as_bytes())?;
        let mut manifest = RunManifest::new("stats", None, json!({ "corpus": path }));
        manifest.input(&path)?;
        manifest.details = json!({ "dropped_undecidable": corpus.provenance.dropped_undecidable });
        out.finish(manifest)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- kappa

/// Mean Cohen's kappa over all pairs of vote positions, using the records
/// that carry the most common number of votes.
fn mean_pairwise_kappa(votes: &[&Vec<hartype::corpus::AnnotationVote>]) -> Result<Option<(usize, f64)>, CliError> {
    let mut by_len: BTreeMap<usize, usize> = BTreeMap::new();
    for v in votes {
        *by_len.entry(v.len()).or_default() += 1;
    }
    let Some((&m, _)) = by_len.iter().filter(|(&len, _)| len >= 2).max_by_key(|(&len, &n)| (n, len)) else {
        return Ok(None);
    };
    let used: Vec<_> = votes.iter().filter(|v| v.len() == m).collect();
    let mut total = 0.0;
    let mut pairs = 0;
    for a in 0..m {
        for b in a + 1..m {
            let xa: Vec<_> = used.iter().map(|v| v[a]).collect();
            let xb: Vec<_> = used.iter().map(|v| v[b]).collect();
            total += cohen_kappa(&xa, &xb)?;
            pairs += 1;
        }
    }
    Ok(Some((used.len(), total / pairs as f64)))
}

pub fn kappa(ctx: &Ctx, args: &CorpusArgs) -> Result<(), CliError> {
    let path = ctx.corpus_path(args)?;
    let records = load_votes(&path, None)?;
    let mut rows = Vec::new();
    let groups: Vec<(String, Option<HarassmentType>)> = HarassmentType::ALL
        .iter()
        .map(|&t| (t.title().to_string(), Some(t)))
        .chain(std::iter::once(("Combined".to_string(), None)))
        .collect();
    for (name, t) in groups {
        let votes: Vec<_> = records
            .iter()
            .filter(|r| t.is_none_or(|t| r.harassment_type == t))
            .map(|r| &r.votes)
            .collect();
        let (items, k) = match mean_pairwise_kappa(&votes)? {
            Some((n, k)) => (n.to_string(), format!("{k:.2}")),
            None => ("0".to_string(), String::new()),
        };
        rows.push(vec![name, items, k]);
    }
    let header = ["Contextual Type", "Items", "Agreement (kappa)"];
    let mut md = format!("| {} |\n|---|---:|---:|\n", header.join(" | "));
    for r in &rows {
        let _ = writeln!(md, "| {} |", r.join(" | "));
    }
    print!("{md}");
    if let Some(mut out) = ctx.out_dir()? {
        out.write("kappa.csv", &csv_bytes(&header, &rows))?;
        let mut manifest = RunManifest::new("kappa", None, json!({ "corpus": path }));
        manifest.input(&path)?;
        out.finish(manifest)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- analyze / freq

fn frequency_rows(corpus: &Corpus, top: usize, stop: Option<&std::collections::HashSet<String>>) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for column in TypeColumn::all() {
        let t = match column {
            TypeColumn::Type(t) => Some(t),
            TypeColumn::Combined => None,
        };
        for label in [Label::Harassing, Label::NonHarassing] {
            let sub = filter_by_type(corpus, t, Some(label));
            for (rank, (word, count)) in frequent_words(&sub, top, stop).into_iter().enumerate() {
                rows.push(vec![
                    column.name().to_string(),
                    label.name().to_string(),
                    (rank + 1).to_string(),
                    word,
                    count.to_string(),
                ]);
            }
        }
    }
    rows
}

pub fn analyze(ctx: &Ctx, args: &AnalyzeArgs) -> Result<(), CliError> {
    let corpus_path = ctx.corpus_path(&args.corpus)?;
    let lexicon_path = existing(
        require(pick(args.lexicon.clone(), ctx.file.paths.lexicon.clone()), "lexicon")?,
        "lexicon",
    )?;
    let threshold = pick(args.threshold, ctx.file.analyze.threshold).unwrap_or(0.5);
    let top = pick(args.top, ctx.file.analyze.top).unwrap_or(25);
    let stop = ctx.stoplist(&args.stoplist)?;
    let mut out = ctx.require_out()?;

    let corpus = load_corpus(&corpus_path, None)?;
    let lexicon = load_lexicon(&lexicon_path)?;
    let table = effect_size_table(&corpus, &lexicon, &TypeColumn::all(), StdKind::Pooled)?;
    out.write("effect_sizes.csv", table.to_csv().as_bytes())?;
    out.write("effect_sizes_significant.csv", table.prune(threshold).to_csv().as_bytes())?;
    let rows = frequency_rows(&corpus, top, stop.as_ref().map(|s| &s.1));
    out.write(
        "frequencies.csv",
        &csv_bytes(&["column", "label", "rank", "word", "count"], &rows),
    )?;

    let mut manifest = RunManifest::new(
        "analyze",
        None,
        json!({
            "corpus": corpus_path,
            "lexicon": lexicon_path,
            "threshold": threshold,
            "top": top,
            "stoplist": stop.as_ref().map(|s| &s.0),
            "std": StdKind::Pooled,
        }),
    );
    manifest.input(&corpus_path)?;
    manifest.input(&lexicon_path)?;
    if let Some((p, _)) = &stop {
        manifest.input(p)?;
    }
    out.finish(manifest)
}

pub fn freq(ctx: &Ctx, args: &FreqArgs) -> Result<(), CliError> {
    let path = ctx.corpus_path(&args.corpus)?;
    let t: Option<HarassmentType> = args.harassment_type.as_deref().map(str::parse).transpose()?;
    let label: Option<Label> = args.label.as_deref().map(str::parse).transpose()?;
    let top = pick(args.top, ctx.file.analyze.top).unwrap_or(25);
    let stop = ctx.stoplist(&args.stoplist)?;
    let corpus = load_corpus(&path, None)?;
    let sub = filter_by_type(&corpus, t, label);
    let rows: Vec<Vec<String>> = frequent_words(&sub, top, stop.as_ref().map(|s| &s.1))
        .into_iter()
        .enumerate()
        .map(|(i, (w, c))| vec![(i + 1).to_string(), w, c.to_string()])
        .collect();
    let bytes = csv_bytes(&["rank", "word", "count"], &rows);
    match ctx.out_dir()? {
        Some(mut out) => {
            out.write("freq.csv", &bytes)?;
            let mut manifest = RunManifest::new(
                "freq",
                None,
                json!({
                    "corpus": path,
                    "type": t.map(HarassmentType::name),
                    "label": label.map(Label::name),
                    "top": top,
                    "stoplist": stop.as_ref().map(|s| &s.0),
                }),
            );
            manifest.input(&path)?;
            out.finish(manifest)?;
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}

// ---------------------------------------------------------------- embeddings

fn embed_config(ctx: &Ctx, args: &EmbedArgs) -> Result<EmbeddingConfig, CliError> {
    let f = &ctx.file.embed;
    let d = EmbeddingConfig::default();
    let mode = match pick(args.mode.clone(), f.mode.clone()).as_deref() {
        None | Some("skipgram") | Some("skip-gram") => TrainMode::SkipGram,
        Some("cbow") => TrainMode::Cbow,
        Some(other) => return Err(CliError::config(format!("unknown embedding mode `{other}`"))),
    };
    let level = match pick(args.level.clone(), f.level.clone()).as_deref() {
        None | Some("word") => Level::Word,
        Some("subword") => {
            let Level::Subword {
                n_min,
                n_max,
                bucket_count,
            } = Level::subword_default()
            else {
                unreachable!()
            };
            Level::Subword {
                n_min: pick(args.ngram_min, f.ngram_min).unwrap_or(n_min),
                n_max: pick(args.ngram_max, f.ngram_max).unwrap_or(n_max),
                bucket_count: pick(args.buckets, f.buckets).unwrap_or(bucket_count),
            }
        }
        Some(other) => return Err(CliError::config(format!("unknown embedding level `{other}`"))),
    };
    let config = EmbeddingConfig {
        dim: pick(args.dim, f.dim).unwrap_or(d.dim),
        window: pick(args.window, f.window).unwrap_or(d.window),
        min_count: pick(args.min_count, f.min_count).unwrap_or(d.min_count),
        mode,
        level,
        negatives: pick(args.negatives, f.negatives).unwrap_or(d.negatives),
        epochs: pick(args.epochs, f.epochs).unwrap_or(d.epochs),
        initial_lr: pick(args.lr, f.lr).unwrap_or(d.initial_lr),
        seed: ctx.seed,
        threads: pick(args.threads, f.threads).unwrap_or(d.threads),
        subsample: None,
    };
    config.validate()?;
    Ok(config)
}

pub fn embed_train(ctx: &Ctx, args: &EmbedArgs) -> Result<(), CliError> {
    let path = existing(
        require(pick(args.sentences.clone(), ctx.file.paths.sentences.clone()), "sentences")?,
        "sentences",
    )?;
    let config = embed_config(ctx, args)?;
    let name = pick(args.name.clone(), ctx.file.embed.name.clone()).unwrap_or_else(|| "embeddings.vec".into());
    let mut out = ctx.require_out()?;
    let text = std::fs::read_to_string(&path)?;
    let sentences: Vec<_> = text
        .lines()
        .enumerate()
        .map(|(i, l)| tokenize_stream(i.to_string(), l))
        .collect();
    let (table, report) = train_with_report(&sentences, &config)?;
    table.save(&out.path(&name))?;
    out.record_existing(&name)?;
    if table.is_subword() {
        let side = sidecar_path(Path::new(&name));
        out.record_existing(&side.to_string_lossy())?;
    }
    let mut report_json = serde_json::to_string_pretty(&report).expect("report serializes");
    report_json.push('\n');
    out.write("embed_report.json", report_json.as_bytes())?;
    let mut manifest = RunManifest::new(
        "embed-train",
        Some(ctx.seed),
        json!({ "sentences": path, "name": name, "config": config }),
    );
    manifest.input(&path)?;
    manifest.details = json!({ "vocab_size": report.vocab_size, "train_tokens": report.train_tokens });
    out.finish(manifest)
}

pub fn project2d(ctx: &Ctx, args: &ProjectArgs) -> Result<(), CliError> {
    let path = existing(require(args.embeddings.clone(), "embeddings")?, "embeddings")?;
    let table = EmbeddingTable::load(&path)?;
    let tokens: Vec<String> = if args.tokens.is_empty() {
        let top = args.top.unwrap_or(50);
        table.vocab().words().iter().take(top).cloned().collect()
    } else {
        args.tokens.clone()
    };
    let coords = project_2d(&table, &tokens)?;
    let rows: Vec<Vec<String>> = coords
        .into_iter()
        .map(|(t, x, y)| vec![t, x.to_string(), y.to_string()])
        .collect();
    let bytes = csv_bytes(&["token", "x", "y"], &rows);
    match ctx.out_dir()? {
        Some(mut out) => {
            out.write("projection.csv", &bytes)?;
            let mut manifest = RunManifest::new("project2d", None, json!({ "embeddings": path, "tokens": tokens }));
            manifest.input(&path)?;
            out.finish(manifest)?;
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}

// ---------------------------------------------------------------- features and learners

struct FeatureSetup {
    spec: FeatureSpec,
    resources: Resources,
    inputs: Vec<PathBuf>,
}

fn parse_composition(text: &str) -> Result<Composition, CliError> {
    match text.split_once(':') {
        None if text == "mean" => Ok(Composition::Mean),
        None if text == "concat_pad" => Ok(Composition::ConcatPad(30)),
        Some(("concat_pad", n)) => n
            .parse()
            .ok()
            .filter(|&n: &usize| n > 0)
            .map(Composition::ConcatPad)
            .ok_or_else(|| CliError::config(format!("bad concat_pad length `{n}`"))),
        _ => Err(CliError::config(format!("unknown composition `{text}`"))),
    }
}

/// Embedding paths from the config file, overridden per block by
/// `--embedding BLOCK=PATH`.
fn embedding_paths(ctx: &Ctx, cli: &[String]) -> Result<BTreeMap<Block, PathBuf>, CliError> {
    let mut paths = BTreeMap::new();
    for (block, path) in &ctx.file.embeddings {
        paths.insert(block.parse::<Block>()?, path.clone());
    }
    for entry in cli {
        let (block, path) = entry
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("expected BLOCK=PATH, got `{entry}`")))?;
        paths.insert(block.trim().parse::<Block>()?, PathBuf::from(path.trim()));
    }
    Ok(paths)
}

/// Loads the lexicon and embedding tables the feature spec needs.
fn load_resources(
    ctx: &Ctx,
    spec: &FeatureSpec,
    lexicon: &Option<PathBuf>,
    embeddings: &[String],
) -> Result<(Resources, Vec<PathBuf>), CliError> {
    let mut resources = Resources::default();
    let mut inputs = Vec::new();
    if spec.contains(Block::Liwc) {
        let p = existing(
            require(pick(lexicon.clone(), ctx.file.paths.lexicon.clone()), "lexicon")?,
            "lexicon",
        )?;
        resources = resources.with_lexicon(load_lexicon(&p)?);
        inputs.push(p);
    }
    let paths = embedding_paths(ctx, embeddings)?;
    for b in spec.blocks.iter().filter(|b| b.block.is_embedding()) {
        let p = paths
            .get(&b.block)
            .cloned()
            .ok_or_else(|| CliError::config(format!("no embedding table given for block {}", b.block)))?;
        let p = existing(p, "embedding table")?;
        resources = resources.with_embeddings(b.block, EmbeddingTable::load(&p)?);
        inputs.push(p);
    }
    Ok((resources, inputs))
}

fn feature_setup(ctx: &Ctx, args: &FeatureArgs, learner: Option<&LearnerConfig>) -> Result<FeatureSetup, CliError> {
    let f = &ctx.file.features;
    let spec_text = require(pick(args.spec.clone(), f.spec.clone()), "spec")?;
    let composition = match pick(args.composition.clone(), f.composition.clone()) {
        Some(c) => parse_composition(&c)?,
        None => Composition::Mean,
    };
    // multinomial NB cannot take standardized (negative) inputs
    let default_standardize = !learner.is_some_and(LearnerConfig::requires_nonnegative);
    let standardize = if args.no_standardize {
        false
    } else {
        f.standardize.unwrap_or(default_standardize)
    };
    let spec = FeatureSpec::parse(&spec_text)?
        .with_composition(composition)
        .with_standardize(standardize);
    let (resources, inputs) = load_resources(ctx, &spec, &args.lexicon, &args.embeddings)?;
    Ok(FeatureSetup {
        spec,
        resources,
        inputs,
    })
}

fn learner_config(ctx: &Ctx, args: &LearnerArgs) -> Result<LearnerConfig, CliError> {
    let f = &ctx.file.learner;
    let kind = match pick(args.learner.clone(), f.kind.clone()).as_deref() {
        None | Some("gbm") => ModelKind::Gbm,
        Some("nb") | Some("nb_multinomial") => ModelKind::NbMultinomial,
        Some("nb_gaussian") => ModelKind::NbGaussian,
        Some("knn") => ModelKind::Knn,
        Some("svm") | Some("linear_svm") => ModelKind::LinearSvm,
        Some(other) => return Err(CliError::config(format!("unknown learner `{other}`"))),
    };
    let seed = rng::derive(ctx.seed, LEARNER_STREAM);
    Ok(match kind {
        ModelKind::Gbm => {
            let d = GbmConfig::default();
            LearnerConfig::Gbm(GbmConfig {
                learning_rate: pick(args.learning_rate, f.learning_rate).unwrap_or(d.learning_rate),
                n_trees: pick(args.n_trees, f.n_trees).unwrap_or(d.n_trees),
                subsample: pick(args.subsample, f.subsample).unwrap_or(d.subsample),
                max_depth: pick(args.max_depth, f.max_depth).unwrap_or(d.max_depth),
                min_samples_split: pick(args.min_samples_split, f.min_samples_split).unwrap_or(d.min_samples_split),
                min_samples_leaf: pick(args.min_samples_leaf, f.min_samples_leaf).unwrap_or(d.min_samples_leaf),
                seed,
            })
        }
        ModelKind::NbMultinomial => LearnerConfig::NbMultinomial {
            alpha: pick(args.alpha, f.alpha).unwrap_or(1.0),
        },
        ModelKind::NbGaussian => LearnerConfig::NbGaussian,
        ModelKind::Knn => LearnerConfig::Knn {
            k: pick(args.knn_k, f.k).unwrap_or(5),
            metric: match pick(args.metric.clone(), f.metric.clone()) {
                Some(m) => m.parse().map_err(CliError::config)?,
                None => Metric::Euclidean,
            },
        },
        ModelKind::LinearSvm => {
            let d = SvmConfig::default();
            LearnerConfig::LinearSvm(SvmConfig {
                lambda: pick(args.lambda, f.lambda).unwrap_or(d.lambda),
                epochs: pick(args.svm_epochs, f.epochs).unwrap_or(d.epochs),
                seed,
            })
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TaskMode {
    Combined,
    PerType,
    Multiclass,
}

fn task_mode(ctx: &Ctx, args: &TaskArgs) -> Result<TaskMode, CliError> {
    match pick(args.task.clone(), ctx.file.task.mode.clone()).as_deref() {
        None | Some("combined") => Ok(TaskMode::Combined),
        Some("per-type") | Some("per_type") => Ok(TaskMode::PerType),
        Some("multiclass") | Some("multi-class") => Ok(TaskMode::Multiclass),
        Some(other) => Err(CliError::config(format!("unknown task `{other}`"))),
    }
}

/// The sampled training corpora for a task mode: balanced binary corpora
/// (combined or one per type) or the six-class corpus.
fn prepare_tasks(
    ctx: &Ctx,
    corpus: &Corpus,
    mode: TaskMode,
    nonharassing_size: Option<usize>,
) -> Result<Vec<(String, Corpus, Task)>, CliError> {
    let seed = rng::derive(ctx.seed, SAMPLE_STREAM);
    Ok(match mode {
        TaskMode::Combined => vec![("combined".into(), balanced_undersample(corpus, seed)?, Task::Binary)],
        TaskMode::PerType => HarassmentType::ALL
            .iter()
            .map(|&t| {
                let sub = filter_by_type(corpus, Some(t), None);
                let sampled = balanced_undersample(&sub, rng::derive(seed, 1 + u64::from(t.code())))
                    .map_err(|e| CliError::data(format!("type {}: {e}", t.name())))?;
                Ok((t.name().to_string(), sampled, Task::Binary))
            })
            .collect::<Result<_, CliError>>()?,
        TaskMode::Multiclass => vec![(
            "multiclass".into(),
            multiclass_sample(corpus, nonharassing_size, seed)?,
            Task::MultiClass,
        )],
    })
}

fn predictions_csv(model: &TrainedModel, corpus: &Corpus, predicted: &hartype::classify::Predictions) -> Vec<u8> {
    let task = Task::from_label_space(&model.label_space);
    let mut header = vec!["id".to_string(), "label".to_string(), "predicted".to_string()];
    header.extend(model.label_space.iter().map(|l| format!("score_{l}")));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("write to memory");
    for (i, tweet) in corpus.iter().enumerate() {
        let truth = task.map_or(String::new(), |t| model.label_space[t.label_of(tweet)].clone());
        let mut record = vec![tweet.id.clone(), truth, model.label_space[predicted.labels[i]].clone()];
        record.extend(predicted.scores.row(i).iter().map(|s| s.to_string()));
        w.write_record(&record).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

fn corpus_csv(corpus: &Corpus) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_corpus(corpus, &mut buf, CorpusFormat::Csv)?;
    Ok(buf)
}

fn feature_settings(setup: &FeatureSetup) -> serde_json::Value {
    json!({
        "spec": setup.spec.to_string(),
        "blocks": setup.spec.blocks,
        "standardize": setup.spec.standardize,
        "resources": setup.inputs,
    })
}

// ---------------------------------------------------------------- vectorize

pub fn vectorize(ctx: &Ctx, args: &VectorizeArgs) -> Result<(), CliError> {
    let path = ctx.corpus_path(&args.corpus)?;
    let setup = feature_setup(ctx, &args.features, None)?;
    let binary = match args.format.as_deref() {
        None | Some("csv") => false,
        Some("binary") | Some("bin") => true,
        Some(other) => return Err(CliError::config(format!("unknown matrix format `{other}`"))),
    };
    let mut out = ctx.require_out()?;
    let corpus = load_corpus(&path, None)?;
    let (pipeline, matrix) = build_features(&corpus, &setup.spec, &setup.resources)?;
    let mut buf = Vec::new();
    let name = if binary {
        matrix.write_binary(&mut buf)?;
        "features.bin"
    } else {
        matrix.write_csv(&mut buf)?;
        "features.csv"
    };
    out.write(name, &buf)?;
    let mut pipeline_json = serde_json::to_string_pretty(&pipeline).expect("pipeline serializes");
    pipeline_json.push('\n');
    out.write("pipeline.json", pipeline_json.as_bytes())?;
    let mut manifest = RunManifest::new(
        "vectorize",
        None,
        json!({ "corpus": path, "features": feature_settings(&setup), "format": name }),
    );
    manifest.input(&path)?;
    for p in &setup.inputs {
        manifest.input(p)?;
    }
    manifest.details = json!({ "rows": matrix.rows(), "width": matrix.width() });
    out.finish(manifest)
}

// ---------------------------------------------------------------- train / cv

pub fn train(ctx: &Ctx, args: &TrainArgs) -> Result<(), CliError> {
    let path = ctx.corpus_path(&args.corpus)?;
    let learner = learner_config(ctx, &args.learner)?;
    let setup = feature_setup(ctx, &args.features, Some(&learner))?;
    let mode = task_mode(ctx, &args.task)?;
    let nh_size = pick(args.task.nonharassing_size, ctx.file.task.nonharassing_size);
    let mut out = ctx.require_out()?;
    let corpus = load_corpus(&path, None)?;
    let mut details = Vec::new();
    for (name, sample, task) in prepare_tasks(ctx, &corpus, mode, nh_size)? {
        let (model, pipeline) = train_model(&sample, task, &setup.spec, &setup.resources, &learner)?;
        let x = pipeline.transform(&corpus_streams(&sample), &setup.resources)?;
        let predicted = model.predict(&x.matrix)?;
        let mut model_json = model.to_json(Some(&pipeline));
        model_json.push('\n');
        out.write(&format!("model_{name}.json"), model_json.as_bytes())?;
        out.write(&format!("train_corpus_{name}.csv"), &corpus_csv(&sample)?)?;
        out.write(
            &format!("train_predictions_{name}.csv"),
            &predictions_csv(&model, &sample, &predicted),
        )?;
        details.push(json!({ "task": name, "samples": sample.len(), "corpus_hash": sample.content_hash() }));
    }
    let mut manifest = RunManifest::new(
        "train",
        Some(ctx.seed),
        json!({
            "corpus": path,
            "task": mode,
            "nonharassing_size": nh_size,
            "features": feature_settings(&setup),
            "learner": learner,
        }),
    );
    manifest.input(&path)?;
    for p in &setup.inputs {
        manifest.input(p)?;
    }
    manifest.details = json!(details);
    out.finish(manifest)
}

/// Saved form of a cross-validation run, re-renderable with `report`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SavedCv {
    pub kind: String,
    pub task: String,
    pub spec: String,
    pub report: CvReport,
}

/// Saved form of a transfer evaluation.
#[derive(Debug, Serialize, Deserialize)]
pub struct SavedTransfer {
    pub kind: String,
    pub spec: Option<String>,
    pub report: TransferReport,
}

fn render_cv(saved: &SavedCv, format: ReportFormat) -> String {
    emit_report(&saved.report.aggregate, Some(&saved.report.std), &saved.spec, format)
}

fn render_transfer(saved: &SavedTransfer, format: ReportFormat) -> (String, String) {
    let name = saved.spec.as_deref().unwrap_or("model");
    (
        emit_report(&saved.report.metrics, None, name, format),
        emit_proportions(&saved.report, format),
    )
}

pub fn cv(ctx: &Ctx, args: &CvArgs) -> Result<(), CliError> {
    let t = &args.train;
    let path = ctx.corpus_path(&t.corpus)?;
    let learner = learner_config(ctx, &t.learner)?;
    let setup = feature_setup(ctx, &t.features, Some(&learner))?;
    let mode = task_mode(ctx, &t.task)?;
    let nh_size = pick(t.task.nonharassing_size, ctx.file.task.nonharassing_size);
    let k = pick(args.folds, ctx.file.cv.k).unwrap_or(10);
    let repeats = pick(args.repeats, ctx.file.cv.repeats).unwrap_or(5);
    let pooled = args.pooled || ctx.file.cv.pooled.unwrap_or(false);
    let format = format_of(&args.format, &ctx.file.report.format)?;
    let mut out = ctx.require_out()?;
    let corpus = load_corpus(&path, None)?;
    let fold_seed = rng::derive(ctx.seed, FOLD_STREAM);
    let mut details = Vec::new();
    for (name, sample, task) in prepare_tasks(ctx, &corpus, mode, nh_size)? {
        let folds = make_folds_stratified(&task.labels(&sample), k, repeats, fold_seed)?;
        let report = cross_validate(&sample, task, &setup.spec, &setup.resources, &learner, &folds, pooled)?;
        let saved = SavedCv {
            kind: "cv".into(),
            task: name.clone(),
            spec: setup.spec.to_string(),
            report,
        };
        let mut text = serde_json::to_string_pretty(&saved).expect("cv report serializes");
        text.push('\n');
        out.write(&format!("cv_{name}.json"), text.as_bytes())?;
        out.write(&format!("cv_{name}.{}", extension(format)), render_cv(&saved, format).as_bytes())?;
        details.push(json!({
            "task": name,
            "samples": sample.len(),
            "corpus_hash": sample.content_hash(),
            "per_fold": saved.report.folds.iter().map(|f| json!({
                "repeat": f.repeat,
                "fold": f.fold,
                "metrics": f.metrics,
            })).collect::<Vec<_>>(),
        }));
    }
    let mut manifest = RunManifest::new(
        "cv",
        Some(ctx.seed),
        json!({
            "corpus": path,
            "task": mode,
            "nonharassing_size": nh_size,
            "features": feature_settings(&setup),
            "learner": learner,
            "k": k,
            "repeats": repeats,
            "pooled": pooled,
            "fold_seed": fold_seed,
            "format": format,
        }),
    );
    manifest.input(&path)?;
    for p in &setup.inputs {
        manifest.input(p)?;
    }
    manifest.details = json!(details);
    out.finish(manifest)
}

// ---------------------------------------------------------------- predict / transfer / report

fn load_model(ctx: &Ctx, cli: &Option<PathBuf>) -> Result<(PathBuf, TrainedModel, FeaturePipeline), CliError> {
    let path = existing(require(pick(cli.clone(), ctx.file.paths.model.clone()), "model")?, "model")?;
    let text = std::fs::read_to_string(&path)?;
    let (model, pipeline) = TrainedModel::from_json(&text)?;
    let pipeline = pipeline.ok_or_else(|| CliError::data("model file carries no feature pipeline"))?;
    Ok((path, model, pipeline))
}

pub fn predict(ctx: &Ctx, args: &PredictArgs) -> Result<(), CliError> {
    let corpus_path = ctx.corpus_path(&args.corpus)?;
    let (model_path, model, pipeline) = load_model(ctx, &args.model)?;
    let (resources, inputs) = load_resources(ctx, &pipeline.spec, &args.lexicon, &args.embeddings)?;
    let corpus = load_corpus(&corpus_path, None)?;
    let x = pipeline.transform(&corpus_streams(&corpus), &resources)?;
    let predicted = model.predict(&x.matrix)?;
    let bytes = predictions_csv(&model, &corpus, &predicted);
    match ctx.out_dir()? {
        Some(mut out) => {
            out.write("predictions.csv", &bytes)?;
            let mut manifest = RunManifest::new(
                "predict",
                None,
                json!({ "corpus": corpus_path, "model": model_path, "resources": inputs }),
            );
            manifest.input(&corpus_path)?;
            manifest.input(&model_path)?;
            for p in &inputs {
                manifest.input(p)?;
            }
            out.finish(manifest)?;
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}

pub fn transfer(ctx: &Ctx, args: &TransferArgs) -> Result<(), CliError> {
    let p = &args.predict;
    let corpus_path = ctx.corpus_path(&p.corpus)?;
    let (model_path, model, pipeline) = load_model(ctx, &p.model)?;
    let (resources, inputs) = load_resources(ctx, &pipeline.spec, &p.lexicon, &p.embeddings)?;
    let format = format_of(&args.format, &ctx.file.report.format)?;
    let mut out = ctx.require_out()?;
    let corpus = load_corpus(&corpus_path, None)?;
    let report = transfer_evaluate(&model, &pipeline, &corpus, &resources)?;
    let saved = SavedTransfer {
        kind: "transfer".into(),
        spec: model.feature_spec.clone(),
        report,
    };
    let mut text = serde_json::to_string_pretty(&saved).expect("transfer report serializes");
    text.push('\n');
    out.write("transfer.json", text.as_bytes())?;
    let (metrics, proportions) = render_transfer(&saved, format);
    let ext = extension(format);
    out.write(&format!("transfer.{ext}"), metrics.as_bytes())?;
    out.write(&format!("proportions.{ext}"), proportions.as_bytes())?;
    let mut manifest = RunManifest::new(
        "transfer",
        None,
        json!({ "corpus": corpus_path, "model": model_path, "resources": inputs, "format": format }),
    );
    manifest.input(&corpus_path)?;
    manifest.input(&model_path)?;
    for p in &inputs {
        manifest.input(p)?;
    }
    out.finish(manifest)
}

pub fn report(ctx: &Ctx, args: &ReportArgs) -> Result<(), CliError> {
    let path = existing(args.input.clone(), "report input")?;
    let format = format_of(&args.format, &ctx.file.report.format)?;
    let text = std::fs::read_to_string(&path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| CliError::data(format!("{}: {e}", path.display()));
    let rendered = match value.get("kind").and_then(|k| k.as_str()) {
        Some("cv") => render_cv(&serde_json::from_value(value).map_err(bad)?, format),
        Some("transfer") => {
            let (m, p) = render_transfer(&serde_json::from_value(value).map_err(bad)?, format);
            format!("{m}\n{p}")
        }
        _ => return Err(CliError::data(format!("{} is not a cv or transfer result", path.display()))),
    };
    match ctx.out_dir()? {
        Some(mut out) => {
            let stem = path.file_stem().map_or("report".into(), |s| s.to_string_lossy().into_owned());
            out.write(&format!("{stem}.{}", extension(format)), rendered.as_bytes())?;
            let mut manifest = RunManifest::new("report", None, json!({ "input": path, "format": format }));
            manifest.input(&path)?;
            out.finish(manifest)?;
        }
        None => print!("{rendered}"),
    }
    Ok(())
}
