//! Skip-gram and CBOW embeddings trained with negative sampling, at word
//! level (word2vec style) and at subword level (fastText style), plus
//! tweet-vector composition and 2-d projection.
//!
//! Parameters live in [`ParamRows`], a matrix of relaxed atomics. The
//! sequential trainer is bit-reproducible; the sharded trainer updates the
//! same rows lock-free from several threads and is not.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Rng};
use crate::text::{character_ngrams, TokenStream};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("no token reaches the minimum count")]
    EmptyVocabulary,
    #[error("invalid embedding configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least two resolvable tokens, got {0}")]
    TooFewPoints(usize),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("embedding file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("subword sidecar: {0}")]
    BadSidecar(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmbeddingError + '_ {
    move |source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    SkipGram,
    Cbow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Level {
    Word,
    Subword {
        n_min: usize,
        n_max: usize,
        bucket_count: u32,
    },
}

impl Level {
    pub fn subword_default() -> Self {
        Level::Subword {
            n_min: 3,
            n_max: 6,
            bucket_count: 2_000_000,
        }
    }

    pub fn is_subword(&self) -> bool {
        matches!(self, Level::Subword { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub min_count: u64,
    pub mode: TrainMode,
    pub level: Level,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub seed: u64,
    /// 1 trains sequentially and reproducibly; more shards the sentences
    /// over lock-free worker threads.
    pub threads: usize,
    /// Frequent-word subsampling threshold (word2vec `sample`), off when `None`.
    pub subsample: Option<f64>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 300,
            window: 3,
            min_count: 10,
            mode: TrainMode::SkipGram,
            level: Level::Word,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            seed: 1,
            threads: 1,
            subsample: None,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let bad = |m: &str| Err(EmbeddingError::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.min_count == 0 {
            return bad("min_count must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("initial_lr must be positive");
        }
        if let Level::Subword {
            n_min,
            n_max,
            bucket_count,
        } = self.level
        {
            if n_min == 0 || n_min > n_max {
                return bad("subword n-gram range must satisfy 1 <= n_min <= n_max");
            }
            if bucket_count == 0 {
                return bad("bucket_count must be positive");
            }
        }
        Ok(())
    }
}

/// Vocabulary with unigram counts, ordered by descending count then token.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocab {
    fn from_ranked(ranked: Vec<(String, u64)>) -> Self {
        let index = ranked
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i))
            .collect();
        let (words, counts) = ranked.into_iter().unzip();
        Vocab {
            words,
            counts,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }
}

pub fn build_vocab(sentences: &[TokenStream], min_count: u64) -> Result<Vocab, EmbeddingError> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for tok in s.surfaces() {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .map(|(w, c)| (w.to_string(), c))
        .collect();
    if ranked.is_empty() {
        return Err(EmbeddingError::EmptyVocabulary);
    }
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(Vocab::from_ranked(ranked))
}

/// 32-bit FNV-1a over the UTF-8 bytes of an n-gram.
pub fn fnv1a(s: &str) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for b in s.bytes() {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

/// Bucket ids of a word's n-grams, whole wrapped word last.
pub fn subword_buckets(token: &str, n_min: usize, n_max: usize, bucket_count: u32) -> Vec<u32> {
    character_ngrams(token, n_min, n_max)
        .iter()
        .map(|g| fnv1a(g) % bucket_count)
        .collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(x)`, stable for large |x|.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Negative derivative of the per-target loss with respect to its score:
/// `label - σ(score)`. Every SGD step scales its updates by this.
fn score_coefficient(score: f64, label: f64) -> f64 {
    label - sigmoid(score)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss and gradients of one negative-sampling term
/// `-ln σ(u⁺·h) - Σ ln σ(-u⁻·h)`.
#[derive(Debug, Clone)]
pub struct NsGradient {
    pub loss: f64,
    pub hidden: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn negative_sampling_loss(hidden: &[f64], positive: &[f64], negatives: &[Vec<f64>]) -> NsGradient {
    let mut grad_h = vec![0.0; hidden.len()];
    let mut loss = 0.0;
    let mut term = |u: &[f64], label: f64, grad_h: &mut [f64]| -> Vec<f64> {
        let score = dot(u, hidden);
        loss += if label > 0.5 {
            neg_log_sigmoid(score)
        } else {
            neg_log_sigmoid(-score)
        };
        let d = -score_coefficient(score, label);
        for (g, x) in grad_h.iter_mut().zip(u) {
            *g += d * x;
        }
        hidden.iter().map(|x| d * x).collect()
    };
    let positive_grad = term(positive, 1.0, &mut grad_h);
    let negative_grads = negatives
        .iter()
        .map(|u| term(u, 0.0, &mut grad_h))
        .collect();
    NsGradient {
        loss,
        hidden: grad_h,
        positive: positive_grad,
        negatives: negative_grads,
    }
}

/// Row-major matrix of f64 stored as relaxed atomics so worker threads can
/// share it without locks.
struct ParamRows {
    dim: usize,
    data: Vec<AtomicU64>,
}

impl ParamRows {
    fn zeros(rows: usize, dim: usize) -> Self {
        ParamRows {
            dim,
            data: (0..rows * dim).map(|_| AtomicU64::new(0f64.to_bits())).collect(),
        }
    }

    fn uniform(rows: usize, dim: usize, rng: &mut Rng) -> Self {
        let bound = 0.5 / dim as f64;
        ParamRows {
            dim,
            data: (0..rows * dim)
                .map(|_| AtomicU64::new(rng.random_range(-bound..bound).to_bits()))
                .collect(),
        }
    }

    fn row(&self, r: usize) -> &[AtomicU64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    fn add_to(&self, r: usize, scale: f64, out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(self.row(r)) {
            *o += scale * f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn dot(&self, r: usize, v: &[f64]) -> f64 {
        self.row(r)
            .iter()
            .zip(v)
            .map(|(a, x)| f64::from_bits(a.load(Ordering::Relaxed)) * x)
            .sum()
    }

    fn axpy(&self, r: usize, scale: f64, v: &[f64]) {
        for (a, x) in self.row(r).iter().zip(v) {
            let cur = f64::from_bits(a.load(Ordering::Relaxed));
            a.store((cur + scale * x).to_bits(), Ordering::Relaxed);
        }
    }

    fn to_vec(&self, r: usize) -> Vec<f64> {
        self.row(r)
            .iter()
            .map(|a| f64::from_bits(a.load(Ordering::Relaxed)))
            .collect()
    }
}

/// Input-side parameters: one row per word, or shared subword bucket rows.
struct InputSide {
    rows: ParamRows,
    /// Per vocab word, the input rows averaged into its representation.
    word_rows: Vec<Vec<usize>>,
    /// Subword level only: compact row index -> bucket id.
    bucket_ids: Vec<u32>,
}

impl InputSide {
    fn new(vocab: &Vocab, config: &EmbeddingConfig, rng: &mut Rng) -> Self {
        match config.level {
            Level::Word => InputSide {
                rows: ParamRows::uniform(vocab.len(), config.dim, rng),
                word_rows: (0..vocab.len()).map(|i| vec![i]).collect(),
                bucket_ids: Vec::new(),
            },
            Level::Subword {
                n_min,
                n_max,
                bucket_count,
            } => {
                // only buckets reachable from the vocabulary are materialized
                let mut compact: HashMap<u32, usize> = HashMap::new();
                let mut bucket_ids = Vec::new();
                let word_rows = vocab
                    .words()
                    .iter()
                    .map(|w| {
                        subword_buckets(w, n_min, n_max, bucket_count)
                            .into_iter()
                            .map(|b| {
                                *compact.entry(b).or_insert_with(|| {
                                    bucket_ids.push(b);
                                    bucket_ids.len() - 1
                                })
                            })
                            .collect()
                    })
                    .collect();
                InputSide {
                    rows: ParamRows::uniform(bucket_ids.len(), config.dim, rng),
                    word_rows,
                    bucket_ids,
                }
            }
        }
    }

    fn accumulate(&self, word: usize, scale: f64, out: &mut [f64]) {
        let rows = &self.word_rows[word];
        let w = scale / rows.len() as f64;
        for &r in rows {
            self.rows.add_to(r, w, out);
        }
    }

    fn represent(&self, word: usize, out: &mut [f64]) {
        out.fill(0.0);
        self.accumulate(word, 1.0, out);
    }

    /// Adds `grad` to every row of the word, as word2vec and fastText do.
    fn apply(&self, word: usize, grad: &[f64]) {
        for &r in &self.word_rows[word] {
            self.rows.axpy(r, 1.0, grad);
        }
    }
}

struct Trainer<'a> {
    config: &'a EmbeddingConfig,
    input: InputSide,
    output: ParamRows,
    noise: WeightedIndex<f64>,
    keep_prob: Option<Vec<f64>>,
    total_steps: f64,
    progress: AtomicU64,
}

impl Trainer<'_> {
    fn lr(&self) -> f64 {
        let done = self.progress.load(Ordering::Relaxed) as f64;
        let frac = (1.0 - done / self.total_steps).max(1e-4);
        self.config.initial_lr * frac
    }

    /// One positive target plus sampled negatives against a fixed hidden
    /// vector; returns the accumulated hidden gradient in `grad_h`.
    fn update_targets(&self, hidden: &[f64], target: usize, lr: f64, rng: &mut Rng, grad_h: &mut [f64]) {
        let mut step = |t: usize, label: f64| {
            let g = lr * score_coefficient(self.output.dot(t, hidden), label);
            self.output.add_to(t, g, grad_h);
            self.output.axpy(t, g, hidden);
        };
        step(target, 1.0);
        for _ in 0..self.config.negatives {
            let neg = self.noise.sample(rng);
            if neg != target {
                step(neg, 0.0);
            }
        }
    }

    fn sentence_ids(&self, sentence: &TokenStream, vocab: &Vocab, rng: &mut Rng) -> Vec<usize> {
        sentence
            .surfaces()
            .filter_map(|t| vocab.get(t))
            .filter(|&i| match &self.keep_prob {
                Some(p) => rng.random::<f64>() < p[i],
                None => true,
            })
            .collect()
    }

    fn train_sentence(&self, ids: &[usize], rng: &mut Rng, hidden: &mut [f64], grad_h: &mut [f64]) {
        let window = self.config.window;
        for pos in 0..ids.len() {
            let lr = self.lr();
            let reach = window - rng.random_range(0..window);
            let lo = pos.saturating_sub(reach);
            let hi = (pos + reach).min(ids.len() - 1);
            match self.config.mode {
                TrainMode::SkipGram => {
                    for c in (lo..=hi).filter(|&c| c != pos) {
                        self.input.represent(ids[pos], hidden);
                        grad_h.fill(0.0);
                        self.update_targets(hidden, ids[c], lr, rng, grad_h);
                        self.input.apply(ids[pos], grad_h);
                    }
                }
                TrainMode::Cbow => {
                    let context: Vec<usize> = (lo..=hi).filter(|&c| c != pos).map(|c| ids[c]).collect();
                    if context.is_empty() {
                        continue;
                    }
                    hidden.fill(0.0);
                    for &c in &context {
                        self.input.accumulate(c, 1.0 / context.len() as f64, hidden);
                    }
                    grad_h.fill(0.0);
                    self.update_targets(hidden, ids[pos], lr, rng, grad_h);
                    for &c in &context {
                        self.input.apply(c, grad_h);
                    }
                }
            }
            self.progress.fetch_add(1, Ordering::Relaxed);
        }
    }

    fn run_shard(&self, shard: &[TokenStream], vocab: &Vocab, rng: &mut Rng) {
        let mut hidden = vec![0.0; self.config.dim];
        let mut grad_h = vec![0.0; self.config.dim];
        for sentence in shard {
            let ids = self.sentence_ids(sentence, vocab, rng);
            if ids.len() >= 2 {
                self.train_sentence(&ids, rng, &mut hidden, &mut grad_h);
            } else {
                self.progress.fetch_add(ids.len() as u64, Ordering::Relaxed);
            }
        }
    }
}

/// Fixed (center, context, negatives) triples evaluated after every epoch.
struct Probe {
    items: Vec<(usize, usize, Vec<usize>)>,
}

const PROBE_PAIRS: usize = 2000;
const PROBE_STREAM: u64 = 0x5052_4f42;

impl Probe {
    fn new(sentences: &[TokenStream], vocab: &Vocab, trainer: &Trainer<'_>) -> Self {
        let mut rng = rng::seeded(rng::derive(trainer.config.seed, PROBE_STREAM));
        let window = trainer.config.window;
        let mut items = Vec::new();
        'outer: for s in sentences {
            let ids: Vec<usize> = s.surfaces().filter_map(|t| vocab.get(t)).collect();
            for pos in 0..ids.len() {
                let lo = pos.saturating_sub(window);
                let hi = (pos + window).min(ids.len().saturating_sub(1));
                for c in (lo..=hi).filter(|&c| c != pos) {
                    let negs = (0..trainer.config.negatives)
                        .map(|_| trainer.noise.sample(&mut rng))
                        .filter(|&n| n != ids[c])
                        .collect();
                    items.push((ids[pos], ids[c], negs));
                    if items.len() >= PROBE_PAIRS {
                        break 'outer;
                    }
                }
            }
        }
        Probe { items }
    }

    /// Mean skip-gram negative-sampling loss over the probe triples.
    fn loss(&self, trainer: &Trainer<'_>) -> f64 {
        if self.items.is_empty() {
            return 0.0;
        }
        let mut hidden = vec![0.0; trainer.config.dim];
        let mut total = 0.0;
        for (center, ctx, negs) in &self.items {
            trainer.input.represent(*center, &mut hidden);
            total += neg_log_sigmoid(trainer.output.dot(*ctx, &hidden));
            for &n in negs {
                total += neg_log_sigmoid(-trainer.output.dot(n, &hidden));
            }
        }
        total / self.items.len() as f64
    }
}

/// Per-epoch diagnostics; entry 0 is the loss before any update.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub probe_loss: Vec<f64>,
    pub vocab_size: usize,
    pub train_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubwordTable {
    pub n_min: usize,
    pub n_max: usize,
    pub bucket_count: u32,
    /// Trained bucket rows; buckets never reached by the training vocabulary
    /// are not stored.
    pub rows: BTreeMap<u32, Vec<f64>>,
}

impl SubwordTable {
    /// Mean of the stored bucket rows of the word's n-grams, `None` when no
    /// n-gram bucket was trained.
    pub fn compose(&self, token: &str, dim: usize) -> Option<Vec<f64>> {
        let buckets = subword_buckets(token, self.n_min, self.n_max, self.bucket_count);
        let found: Vec<&Vec<f64>> = buckets.iter().filter_map(|b| self.rows.get(b)).collect();
        if found.is_empty() {
            return None;
        }
        let w = 1.0 / found.len() as f64;
        let mut out = vec![0.0; dim];
        for row in found {
            for (o, x) in out.iter_mut().zip(row) {
                *o += w * x;
            }
        }
        Some(out)
    }
}

/// Trained embeddings: one vector per vocabulary token, plus subword bucket
/// rows for tables trained at subword level.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocab,
    dim: usize,
    vectors: Vec<f64>,
    subwords: Option<SubwordTable>,
    pub config: EmbeddingConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "len")]
pub enum Composition {
    #[default]
    Mean,
    /// First `L` token vectors concatenated and zero padded to `L * dim`.
    ConcatPad(usize),
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn is_subword(&self) -> bool {
        self.subwords.is_some()
    }

    pub fn subwords(&self) -> Option<&SubwordTable> {
        self.subwords.as_ref()
    }

    fn stored(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Stored row at word level; composed from n-gram buckets at subword
    /// level, which also covers unseen words.
    pub fn word_vector(&self, token: &str) -> Option<Vec<f64>> {
        match &self.subwords {
            None => self.vocab.get(token).map(|i| self.stored(i).to_vec()),
            Some(sub) => sub.compose(token, self.dim),
        }
    }

    pub fn compose_tweet(&self, tweet: &TokenStream, strategy: Composition) -> Vec<f64> {
        match strategy {
            Composition::Mean => {
                let mut sum = vec![0.0; self.dim];
                let mut n = 0usize;
                for tok in tweet.surfaces() {
                    if let Some(v) = self.word_vector(tok) {
                        for (s, x) in sum.iter_mut().zip(&v) {
                            *s += x;
                        }
                        n += 1;
                    }
                }
                if n > 0 {
                    sum.iter_mut().for_each(|s| *s /= n as f64);
                }
                sum
            }
            Composition::ConcatPad(len) => {
                let mut out = vec![0.0; len * self.dim];
                for (slot, tok) in tweet.surfaces().take(len).enumerate() {
                    if let Some(v) = self.word_vector(tok) {
                        out[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(&v);
                    }
                }
                out
            }
        }
    }

    pub fn composed_width(&self, strategy: Composition) -> usize {
        match strategy {
            Composition::Mean => self.dim,
            Composition::ConcatPad(len) => len * self.dim,
        }
    }

    /// word2vec text format: `|V| dim` header then `token v1 .. vdim` lines.
    /// Subword tables also write `<path>.buckets`.
    pub fn save(&self, path: &Path) -> Result<(), EmbeddingError> {
        let file = std::fs::File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        self.write_text(&mut w).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))?;
        if let Some(sub) = &self.subwords {
            let side = sidecar_path(path);
            let file = std::fs::File::create(&side).map_err(io_err(&side))?;
            let mut w = BufWriter::new(file);
            write_sidecar(sub, self.dim, &mut w).map_err(io_err(&side))?;
            w.flush().map_err(io_err(&side))?;
        }
        Ok(())
    }

    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.vocab.len(), self.dim)?;
        for (i, word) in self.vocab.words().iter().enumerate() {
            write!(w, "{word}")?;
            for x in self.stored(i) {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Loads a table written by [`EmbeddingTable::save`]; a `.buckets`
    /// sidecar next to the file marks a subword table.
    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let file = std::fs::File::open(path).map_err(io_err(path))?;
        let mut table = Self::read_text(BufReader::new(file))?;
        let side = sidecar_path(path);
        if side.exists() {
            let file = std::fs::File::open(&side).map_err(io_err(&side))?;
            let (sub, dim) = read_sidecar(BufReader::new(file))?;
            if dim != table.dim {
                return Err(EmbeddingError::BadSidecar(format!(
                    "dimension {dim} differs from text file dimension {}",
                    table.dim
                )));
            }
            table.config.level = Level::Subword {
                n_min: sub.n_min,
                n_max: sub.n_max,
                bucket_count: sub.bucket_count,
            };
            table.subwords = Some(sub);
        }
        Ok(table)
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut lines = reader.lines().enumerate();
        let parse_err = |line: usize, reason: String| EmbeddingError::Parse { line, reason };
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?;
        let header = header.map_err(|e| parse_err(1, e.to_string()))?;
        let mut parts = header.split_whitespace();
        let mut field = |name: &str| -> Result<usize, EmbeddingError> {
            parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| parse_err(1, format!("bad {name} in header")))
        };
        let (n, dim) = (field("vocabulary size")?, field("dimension")?);
        if dim == 0 {
            return Err(parse_err(1, "dimension must be positive".into()));
        }
        let mut words = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n * dim);
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| parse_err(line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let word = parts.next().unwrap_or_default().to_string();
            let before = vectors.len();
            for p in parts.filter(|p| !p.is_empty()) {
                let x: f64 = p
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad number `{p}`")))?;
                vectors.push(x);
            }
            if vectors.len() - before != dim {
                return Err(parse_err(
                    line_no,
                    format!("expected {dim} values, found {}", vectors.len() - before),
                ));
            }
            words.push(word);
        }
        if words.len() != n {
            return Err(parse_err(1, format!("header announces {n} rows, found {}", words.len())));
        }
        // counts are not part of the text format; keep the stored order
        let ranked = words.into_iter().map(|w| (w, 0)).collect();
        Ok(EmbeddingTable {
            vocab: Vocab::from_ranked(ranked),
            dim,
            vectors,
            subwords: None,
            config: EmbeddingConfig {
                dim,
                ..EmbeddingConfig::default()
            },
        })
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".buckets");
    PathBuf::from(s)
}

const SIDECAR_MAGIC: &[u8; 8] = b"HTSUBWRD";
const SIDECAR_VERSION: u32 = 1;

fn write_sidecar<W: Write>(sub: &SubwordTable, dim: usize, w: &mut W) -> std::io::Result<()> {
    w.write_all(SIDECAR_MAGIC)?;
    w.write_all(&SIDECAR_VERSION.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&(sub.n_min as u32).to_le_bytes())?;
    w.write_all(&(sub.n_max as u32).to_le_bytes())?;
    w.write_all(&sub.bucket_count.to_le_bytes())?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&(sub.rows.len() as u64).to_le_bytes())?;
    for (id, row) in &sub.rows {
        w.write_all(&id.to_le_bytes())?;
        for x in row {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_sidecar<R: Read>(mut r: R) -> Result<(SubwordTable, usize), EmbeddingError> {
    let bad = |m: &str| EmbeddingError::BadSidecar(m.to_string());
    let mut u32_buf = [0u8; 4];
    let mut read_u32 = |r: &mut R| -> Result<u32, EmbeddingError> {
        r.read_exact(&mut u32_buf).map_err(|_| bad("truncated"))?;
        Ok(u32::from_le_bytes(u32_buf))
    };
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != SIDECAR_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = read_u32(&mut r)?;
    if version != SIDECAR_VERSION {
        return Err(EmbeddingError::BadSidecar(format!("unsupported version {version}")));
    }
    let _reserved = read_u32(&mut r)?;
    let n_min = read_u32(&mut r)? as usize;
    let n_max = read_u32(&mut r)? as usize;
    let bucket_count = read_u32(&mut r)?;
    let dim = read_u32(&mut r)? as usize;
    let mut n_buf = [0u8; 8];
    r.read_exact(&mut n_buf).map_err(|_| bad("truncated"))?;
    let n_rows = u64::from_le_bytes(n_buf);
    let mut rows = BTreeMap::new();
    let mut f_buf = [0u8; 8];
    for _ in 0..n_rows {
        let id = read_u32(&mut r)?;
        let mut row = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut f_buf).map_err(|_| bad("truncated row"))?;
            row.push(f64::from_le_bytes(f_buf));
        }
        rows.insert(id, row);
    }
    Ok((
        SubwordTable {
            n_min,
            n_max,
            bucket_count,
            rows,
        },
        dim,
    ))
}

/// Trains an embedding table; see [`train_with_report`].
pub fn train(sentences: &[TokenStream], config: &EmbeddingConfig) -> Result<EmbeddingTable, EmbeddingError> {
    train_with_report(sentences, config).map(|(t, _)| t)
}

/// Trains with linear learning-rate decay to 1e-4 of the initial rate and
/// negatives drawn from the unigram distribution raised to 3/4. Returns the
/// probe loss measured before training and after every epoch.
pub fn train_with_report(
    sentences: &[TokenStream],
    config: &EmbeddingConfig,
) -> Result<(EmbeddingTable, TrainReport), EmbeddingError> {
    config.validate()?;
    let vocab = build_vocab(sentences, config.min_count)?;
    let mut init_rng = rng::seeded(config.seed);
    let input = InputSide::new(&vocab, config, &mut init_rng);
    let output = ParamRows::zeros(vocab.len(), config.dim);
    let noise = WeightedIndex::new(vocab.counts().iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| EmbeddingError::InvalidConfig(e.to_string()))?;

    let train_tokens: u64 = sentences
        .iter()
        .map(|s| s.surfaces().filter(|t| vocab.get(t).is_some()).count() as u64)
        .sum();
    let keep_prob = config.subsample.map(|t| {
        let threshold = t * train_tokens as f64;
        vocab
            .counts()
            .iter()
            .map(|&c| {
                let c = c as f64;
                ((c / threshold).sqrt() + 1.0) * threshold / c
            })
            .collect()
    });
    let trainer = Trainer {
        config,
        input,
        output,
        noise,
        keep_prob,
        total_steps: (config.epochs as u64 * train_tokens).max(1) as f64,
        progress: AtomicU64::new(0),
    };
    let probe = Probe::new(sentences, &vocab, &trainer);
    let mut report = TrainReport {
        probe_loss: vec![probe.loss(&trainer)],
        vocab_size: vocab.len(),
        train_tokens,
    };

    let mut rngs: Vec<Rng> = (0..config.threads)
        .map(|t| rng::seeded(rng::derive(config.seed, t as u64 + 1)))
        .collect();
    for _ in 0..config.epochs {
        if config.threads == 1 {
            trainer.run_shard(sentences, &vocab, &mut rngs[0]);
        } else {
            let shard_len = sentences.len().div_ceil(config.threads).max(1);
            std::thread::scope(|scope| {
                for (shard, rng) in sentences.chunks(shard_len).zip(rngs.iter_mut()) {
                    let trainer = &trainer;
                    let vocab = &vocab;
                    scope.spawn(move || trainer.run_shard(shard, vocab, rng));
                }
            });
        }
        report.probe_loss.push(probe.loss(&trainer));
    }

    let dim = config.dim;
    let mut vectors = vec![0.0; vocab.len() * dim];
    for (i, chunk) in vectors.chunks_mut(dim).enumerate() {
        trainer.input.represent(i, chunk);
    }
    let subwords = match config.level {
        Level::Word => None,
        Level::Subword {
            n_min,
            n_max,
            bucket_count,
        } => Some(SubwordTable {
            n_min,
            n_max,
            bucket_count,
            rows: trainer
                .input
                .bucket_ids
                .iter()
                .enumerate()
                .map(|(r, &b)| (b, trainer.input.rows.to_vec(r)))
                .collect(),
        }),
    };
    let mut table = EmbeddingTable {
        vocab,
        dim,
        vectors,
        subwords,
        config: config.clone(),
    };
    // stored subword vectors are recomposed from the bucket map so that
    // lookups by string give bit-identical results
    if let Some(sub) = &table.subwords {
        let recomposed: Vec<f64> = table
            .vocab
            .words()
            .iter()
            .flat_map(|w| sub.compose(w, dim).expect("vocabulary buckets are stored"))
            .collect();
        table.vectors = recomposed;
    }
    Ok((table, report))
}

/// Centered PCA coordinates on the top two principal components.
///
/// Computed from the eigendecomposition of the Gram matrix of the centered
/// vectors, so pairwise distances within the spanned plane are preserved.
/// Each axis is oriented so its largest-magnitude coordinate is positive.
pub fn pca_2d(vectors: &[Vec<f64>]) -> Result<Vec<(f64, f64)>, EmbeddingError> {
    let n = vectors.len();
    if n < 2 {
        return Err(EmbeddingError::TooFewPoints(n));
    }
    let dim = vectors[0].len();
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / n as f64;
        }
    }
    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let gram = DMatrix::from_fn(n, n, |i, j| dot(&centered[i], &centered[j]));
    let scale = gram.diagonal().iter().copied().fold(0.0, f64::max);
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut axes = [vec![0.0; n], vec![0.0; n]];
    for (axis, &k) in axes.iter_mut().zip(&order) {
        let lambda = eig.eigenvalues[k];
        if scale == 0.0 || lambda <= 1e-12 * scale {
            continue;
        }
        let col = eig.eigenvectors.column(k);
        let pivot = (0..n)
            .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a)))
            .unwrap_or(0);
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (i, a) in axis.iter_mut().enumerate() {
            *a = sign * col[i] * lambda.sqrt();
        }
    }
    Ok((0..n).map(|i| (axes[0][i], axes[1][i])).collect())
}

/// 2-d projection of the resolvable tokens; unresolvable tokens are skipped.
pub fn project_2d(table: &EmbeddingTable, tokens: &[String]) -> Result<Vec<(String, f64, f64)>, EmbeddingError> {
    let (names, vectors): (Vec<&String>, Vec<Vec<f64>>) = tokens
        .iter()
        .filter_map(|t| table.word_vector(t).map(|v| (t, v)))
        .unzip();
    let coords = pca_2d(&vectors)?;
    Ok(names
        .into_iter()
        .zip(coords)
        .map(|(t, (x, y))| (t.clone(), x, y))
        .collect())
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize_stream;
    use proptest::prelude::*;

    fn stream(text: &str) -> TokenStream {
        tokenize_stream("s", text)
    }

    fn small_config() -> EmbeddingConfig {
        EmbeddingConfig {
            dim: 8,
            min_count: 1,
            epochs: 2,
            ..EmbeddingConfig::default()
        }
    }

    #[test]
    fn vocab_counts_and_order() {
        let mut sentences = vec![stream("b a"); 5];
        sentences.push(stream("rare"));
        let v = build_vocab(&sentences, 1).unwrap();
        assert_eq!(v.words(), ["a", "b", "rare"]);
        assert_eq!(v.counts(), [5, 5, 1]);
        let v = build_vocab(&sentences, 2).unwrap();
        assert_eq!(v.words(), ["a", "b"]);
        let nine = vec![stream("x"); 9];
        assert!(matches!(build_vocab(&nine, 10), Err(EmbeddingError::EmptyVocabulary)));
    }

    #[test]
    fn fnv_reference_values() {
        // standard FNV-1a 32-bit test vectors
        assert_eq!(fnv1a(""), 0x811c9dc5);
        assert_eq!(fnv1a("a"), 0xe40c292c);
        assert_eq!(fnv1a("foobar"), 0xbf9cf968);
    }

    #[test]
    fn config_validation() {
        for bad in [
            EmbeddingConfig { dim: 0, ..small_config() },
            EmbeddingConfig { window: 0, ..small_config() },
            EmbeddingConfig { negatives: 0, ..small_config() },
            EmbeddingConfig { min_count: 0, ..small_config() },
            EmbeddingConfig {
                level: Level::Subword { n_min: 4, n_max: 3, bucket_count: 10 },
                ..small_config()
            },
        ] {
            assert!(matches!(bad.validate(), Err(EmbeddingError::InvalidConfig(_))));
        }
    }

    #[test]
    fn lookups_and_composition() {
        let sentences = vec![stream("red green blue"); 20];
        let table = train(&sentences, &small_config()).unwrap();
        let red = table.word_vector("red").unwrap();
        assert_eq!(red.len(), 8);
        assert!(table.word_vector("purple").is_none());

        assert_eq!(table.compose_tweet(&stream("red"), Composition::Mean), red);
        let green = table.word_vector("green").unwrap();
        let mean = table.compose_tweet(&stream("red green purple"), Composition::Mean);
        for i in 0..8 {
            assert!((mean[i] - (red[i] + green[i]) / 2.0).abs() < 1e-15);
        }
        let padded = table.compose_tweet(&stream(""), Composition::ConcatPad(30));
        assert_eq!(padded.len(), 240);
        assert!(padded.iter().all(|x| *x == 0.0));
        let pair = table.compose_tweet(&stream("purple red"), Composition::ConcatPad(3));
        assert!(pair[..8].iter().all(|x| *x == 0.0));
        assert_eq!(&pair[8..16], red.as_slice());
    }

    #[test]
    fn subword_lookup_covers_unseen_words() {
        let config = EmbeddingConfig {
            level: Level::Subword { n_min: 3, n_max: 6, bucket_count: 50_000 },
            ..small_config()
        };
        let sentences = vec![stream("stupid people say stupidest things"); 10];
        let table = train(&sentences, &config).unwrap();
        let seen = table.word_vector("stupid").unwrap();
        assert_eq!(seen, table.word_vector("stupid").unwrap());
        let stored = &table.vectors[table.vocab.get("stupid").unwrap() * 8..][..8];
        assert_eq!(stored, seen.as_slice());
        let unseen = table.word_vector("stupidity").unwrap();
        assert!(unseen.iter().all(|x| x.is_finite()));
        assert!(table.word_vector("qqqq").is_none());
    }

    #[test]
    fn text_and_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sentences = vec![stream("alpha beta gamma"); 10];
        for level in [Level::Word, Level::Subword { n_min: 2, n_max: 4, bucket_count: 1000 }] {
            let table = train(&sentences, &EmbeddingConfig { level, ..small_config() }).unwrap();
            let path = dir.path().join("emb.txt");
            table.save(&path).unwrap();
            let back = EmbeddingTable::load(&path).unwrap();
            assert_eq!(back.vectors, table.vectors);
            assert_eq!(back.subwords, table.subwords);
            assert_eq!(back.word_vector("alphabet"), table.word_vector("alphabet"));
            std::fs::remove_file(sidecar_path(&path)).ok();
        }
    }

    #[test]
    fn reload_rejects_bad_rows() {
        let err = EmbeddingTable::read_text("2 2\na 1 2\nb 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EmbeddingError::Parse { line: 3, .. }));
        let err = EmbeddingTable::read_text("3 2\na 1 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EmbeddingError::Parse { line: 1, .. }));
    }

    #[test]
    fn sequential_training_is_reproducible() {
        let sentences: Vec<TokenStream> = (0..50).map(|i| stream(&format!("w{} w{} w{}", i % 7, i % 5, i % 3))).collect();
        for mode in [TrainMode::SkipGram, TrainMode::Cbow] {
            let config = EmbeddingConfig { mode, ..small_config() };
            assert_eq!(train(&sentences, &config).unwrap(), train(&sentences, &config).unwrap());
        }
    }

    #[test]
    fn parallel_training_produces_finite_vectors() {
        let sentences: Vec<TokenStream> = (0..200).map(|i| stream(&format!("w{} w{} w{}", i % 7, i % 5, i % 3))).collect();
        let config = EmbeddingConfig { threads: 4, ..small_config() };
        let table = train(&sentences, &config).unwrap();
        assert!(table.vectors.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn pca_special_cases() {
        let coords = pca_2d(&[vec![1.0, 2.0, 3.0], vec![-1.0, -2.0, -3.0]]).unwrap();
        assert!((coords[0].0 + coords[1].0).abs() < 1e-12);
        assert!(coords[0].0.abs() > 1.0);
        assert!(coords.iter().all(|c| c.1.abs() < 1e-12));
        let same = pca_2d(&vec![vec![0.5, 0.5]; 4]).unwrap();
        assert!(same.iter().all(|&(x, y)| x == 0.0 && y == 0.0));
        assert!(matches!(pca_2d(&[vec![1.0]]), Err(EmbeddingError::TooFewPoints(1))));
    }

    #[test]
    fn pca_preserves_planar_distances() {
        // a 3 x 1 rectangle embedded in 10-d along two orthonormal directions
        let mut u = [0.0; 10];
        let mut v = [0.0; 10];
        u[1] = 0.6;
        u[4] = 0.8;
        v[2] = 1.0;
        let corner = |a: f64, b: f64| -> Vec<f64> {
            (0..10).map(|i| 0.3 + a * u[i] + b * v[i]).collect()
        };
        let pts = vec![corner(0.0, 0.0), corner(3.0, 0.0), corner(3.0, 1.0), corner(0.0, 1.0)];
        let coords = pca_2d(&pts).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let orig: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let proj = ((coords[i].0 - coords[j].0).powi(2) + (coords[i].1 - coords[j].1).powi(2)).sqrt();
                assert!((orig - proj).abs() < 1e-9, "{i}-{j}: {orig} vs {proj}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn mean_is_order_invariant(words in prop::collection::vec(0usize..6, 1..8)) {
            let sentences = vec![stream("a b c d e f"); 10];
            let table = train(&sentences, &small_config()).unwrap();
            let names = ["a", "b", "c", "d", "e", "f"];
            let text: Vec<&str> = words.iter().map(|&i| names[i]).collect();
            let mut reversed = text.clone();
            reversed.reverse();
            let fwd = table.compose_tweet(&stream(&text.join(" ")), Composition::Mean);
            let back = table.compose_tweet(&stream(&reversed.join(" ")), Composition::Mean);
            for (x, y) in fwd.iter().zip(&back) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let cat_fwd = table.compose_tweet(&stream(&text.join(" ")), Composition::ConcatPad(8));
            let cat_back = table.compose_tweet(&stream(&reversed.join(" ")), Composition::ConcatPad(8));
            let palindrome = text == reversed;
            prop_assert_eq!(cat_fwd == cat_back, palindrome);
        }

        #[test]
        fn trained_vectors_are_finite(
            dim in 1usize..12,
            window in 1usize..5,
            negatives in 1usize..6,
            lr in 0.001f64..0.5,
            cbow in any::<bool>(),
            subword in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let sentences: Vec<TokenStream> = (0..40).map(|i| stream(&format!("t{} t{} t{} t{}", i % 9, i % 4, i % 6, i % 2))).collect();
            let config = EmbeddingConfig {
                dim, window, negatives, initial_lr: lr, seed, min_count: 1, epochs: 2,
                mode: if cbow { TrainMode::Cbow } else { TrainMode::SkipGram },
                level: if subword { Level::Subword { n_min: 2, n_max: 4, bucket_count: 5000 } } else { Level::Word },
                ..EmbeddingConfig::default()
            };
            let table = train(&sentences, &config).unwrap();
            prop_assert!(table.vectors.iter().all(|x| x.is_finite()));
        }
    }
}
