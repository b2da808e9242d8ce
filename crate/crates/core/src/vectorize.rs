//! TFIDF vectorization and concatenation of feature blocks
//! (`T`, `L`, `W(S)`, `W(C)`, `F(S)`, `F(C)`) into one feature matrix.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::embeddings::{Composition, EmbeddingTable};
use crate::lexicon::{liwc_feature_names, liwc_vector, CategoryLexicon};
use crate::matrix::DenseMatrix;
use crate::text::{tokenize_stream, TokenStream};

#[derive(Debug, Error)]
pub enum VectorizeError {
    #[error("cannot fit TFIDF on an empty corpus")]
    EmptyCorpus,
    #[error("no resource supplied for feature block {0}")]
    MissingResource(Block),
    #[error("feature block {block} needs a {expected} embedding table")]
    WrongResource { block: Block, expected: &'static str },
    #[error("dimension mismatch: expected width {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("unknown feature block `{0}`")]
    UnknownBlock(String),
    #[error("feature block `{0}` listed twice")]
    DuplicateBlock(String),
    #[error("empty feature spec")]
    EmptySpec,
    #[error("feature matrix file: {0}")]
    BadMatrixFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    L2,
    None,
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    pub dim: usize,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Unigram TFIDF with smoothed idf `ln((1 + N) / (1 + df)) + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    pub norm: Norm,
    /// SHA-256 over the fitting documents' source ids.
    pub fitted_on: String,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TfidfModel {
    fn rebuild_index(&mut self) {
        self.index = self
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn width(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        if self.index.is_empty() && !self.vocabulary.is_empty() {
            return self.vocabulary.iter().position(|w| w == token);
        }
        self.index.get(token).copied()
    }

    /// `count(t) * idf(t)` over in-vocabulary word tokens, optionally
    /// L2-normalized. Out-of-vocabulary tokens are ignored.
    pub fn transform(&self, tweet: &TokenStream) -> SparseVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for w in tweet.words() {
            if let Some(c) = self.column(w) {
                *counts.entry(c).or_default() += 1.0;
            }
        }
        let (indices, mut values): (Vec<usize>, Vec<f64>) =
            counts.into_iter().map(|(c, n)| (c, n * self.idf[c])).unzip();
        if self.norm == Norm::L2 {
            let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                values.iter_mut().for_each(|v| *v /= norm);
            }
        }
        SparseVector {
            dim: self.width(),
            indices,
            values,
        }
    }
}

/// Fits the vocabulary (descending document frequency, lexicographic ties)
/// and idf weights on the word tokens of `docs`.
pub fn fit_tfidf(docs: &[TokenStream], norm: Norm) -> Result<TfidfModel, VectorizeError> {
    if docs.is_empty() {
        return Err(VectorizeError::EmptyCorpus);
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    let mut hasher = Sha256::new();
    for d in docs {
        hasher.update(d.source_id.as_bytes());
        hasher.update([0]);
        let unique: HashSet<&str> = d.words().collect();
        for w in unique {
            *df.entry(w).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let n = docs.len() as f64;
    let mut model = TfidfModel {
        vocabulary: ranked.iter().map(|(w, _)| w.to_string()).collect(),
        idf: ranked
            .iter()
            .map(|(_, d)| ((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0)
            .collect(),
        norm,
        fitted_on: hex::encode(hasher.finalize()),
        index: HashMap::new(),
    };
    model.rebuild_index();
    Ok(model)
}

/// Restores the lookup index after deserialization.
pub fn restore_tfidf(mut model: TfidfModel) -> TfidfModel {
    model.rebuild_index();
    model
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Block {
    #[serde(rename = "T")]
    Tfidf,
    #[serde(rename = "L")]
    Liwc,
    #[serde(rename = "W(S)")]
    WordSkipGram,
    #[serde(rename = "W(C)")]
    WordCbow,
    #[serde(rename = "F(S)")]
    SubwordSkipGram,
    #[serde(rename = "F(C)")]
    SubwordCbow,
}

impl Block {
    pub const ALL: [Block; 6] = [
        Block::Tfidf,
        Block::Liwc,
        Block::WordSkipGram,
        Block::WordCbow,
        Block::SubwordSkipGram,
        Block::SubwordCbow,
    ];

    pub fn notation(self) -> &'static str {
        match self {
            Block::Tfidf => "T",
            Block::Liwc => "L",
            Block::WordSkipGram => "W(S)",
            Block::WordCbow => "W(C)",
            Block::SubwordSkipGram => "F(S)",
            Block::SubwordCbow => "F(C)",
        }
    }

    pub fn is_embedding(self) -> bool {
        !matches!(self, Block::Tfidf | Block::Liwc)
    }

    pub fn is_subword(self) -> bool {
        matches!(self, Block::SubwordSkipGram | Block::SubwordCbow)
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.notation())
    }
}

impl FromStr for Block {
    type Err = VectorizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        Block::ALL
            .into_iter()
            .find(|b| b.notation() == compact)
            .ok_or(VectorizeError::UnknownBlock(s.trim().to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub block: Block,
    #[serde(default)]
    pub composition: Composition,
}

/// Ordered feature blocks, written as in `F(S)+W(S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub blocks: Vec<BlockSpec>,
    /// Column standardization of every block before concatenation.
    #[serde(default = "default_true")]
    pub standardize: bool,
}

fn default_true() -> bool {
    true
}

impl FeatureSpec {
    pub fn parse(text: &str) -> Result<Self, VectorizeError> {
        if text.trim().is_empty() {
            return Err(VectorizeError::EmptySpec);
        }
        let mut blocks: Vec<BlockSpec> = Vec::new();
        for part in text.split('+') {
            if part.trim().is_empty() {
                return Err(VectorizeError::UnknownBlock(part.to_string()));
            }
            let block: Block = part.parse()?;
            if blocks.iter().any(|b| b.block == block) {
                return Err(VectorizeError::DuplicateBlock(block.notation().to_string()));
            }
            blocks.push(BlockSpec {
                block,
                composition: Composition::Mean,
            });
        }
        Ok(FeatureSpec {
            blocks,
            standardize: true,
        })
    }

    /// Sets the composition of every embedding block.
    pub fn with_composition(mut self, composition: Composition) -> Self {
        for b in &mut self.blocks {
            if b.block.is_embedding() {
                b.composition = composition;
            }
        }
        self
    }

    pub fn with_standardize(mut self, standardize: bool) -> Self {
        self.standardize = standardize;
        self
    }

    pub fn contains(&self, block: Block) -> bool {
        self.blocks.iter().any(|b| b.block == block)
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.blocks.iter().map(|b| b.block.notation()).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for FeatureSpec {
    type Err = VectorizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureSpec::parse(s)
    }
}

/// Pretrained resources shared across folds: the category lexicon and one
/// embedding table per embedding block.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub lexicon: Option<CategoryLexicon>,
    pub embeddings: BTreeMap<Block, EmbeddingTable>,
}

impl Resources {
    pub fn with_lexicon(mut self, lexicon: CategoryLexicon) -> Self {
        self.lexicon = Some(lexicon);
        self
    }

    pub fn with_embeddings(mut self, block: Block, table: EmbeddingTable) -> Self {
        self.embeddings.insert(block, table);
        self
    }

    fn table(&self, block: Block) -> Result<&EmbeddingTable, VectorizeError> {
        let table = self
            .embeddings
            .get(&block)
            .ok_or(VectorizeError::MissingResource(block))?;
        if table.is_subword() != block.is_subword() {
            return Err(VectorizeError::WrongResource {
                block,
                expected: if block.is_subword() { "subword-level" } else { "word-level" },
            });
        }
        Ok(table)
    }
}

/// Per-column shift and scale fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations; 0 for constant columns.
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(m: &DenseMatrix) -> Self {
        let n = m.rows().max(1) as f64;
        let mut means = vec![0.0; m.cols()];
        for row in m.iter_rows() {
            for (s, x) in means.iter_mut().zip(row) {
                *s += x;
            }
        }
        means.iter_mut().for_each(|s| *s /= n);
        let mut vars = vec![0.0; m.cols()];
        for row in m.iter_rows() {
            for ((v, x), mu) in vars.iter_mut().zip(row).zip(&means) {
                *v += (x - mu) * (x - mu);
            }
        }
        let scales = vars.iter().map(|v| (v / n).sqrt()).collect();
        Standardizer { means, scales }
    }

    /// Constant columns map to 0.
    pub fn apply(&self, m: &mut DenseMatrix) {
        for i in 0..m.rows() {
            for ((x, mu), s) in m.row_mut(i).iter_mut().zip(&self.means).zip(&self.scales) {
                *x = if *s > 0.0 { (*x - mu) / s } else { 0.0 };
            }
        }
    }
}

/// Dense feature rows aligned with tweet ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub matrix: DenseMatrix,
    pub row_ids: Vec<String>,
    pub spec: FeatureSpec,
    pub block_offsets: Vec<Range<usize>>,
    pub column_labels: Vec<String>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn width(&self) -> usize {
        self.matrix.cols()
    }

    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            matrix: self.matrix.select_rows(indices),
            row_ids: indices.iter().map(|&i| self.row_ids[i].clone()).collect(),
            spec: self.spec.clone(),
            block_offsets: self.block_offsets.clone(),
            column_labels: self.column_labels.clone(),
        }
    }

    /// CSV with an `id` column followed by one column per feature label.
    /// Values are written at full round-trip precision.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let header = std::iter::once("id").chain(self.column_labels.iter().map(String::as_str));
        wtr.write_record(header)?;
        for (id, row) in self.row_ids.iter().zip(self.matrix.iter_rows()) {
            let record = std::iter::once(id.clone()).chain(row.iter().map(f64::to_string));
            wtr.write_record(record)?;
        }
        wtr.flush()
    }

    pub fn write_binary<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write_matrix_binary(&self.matrix, w)
    }
}

const MATRIX_MAGIC: &[u8; 4] = b"HTFM";
const MATRIX_VERSION: u32 = 1;

/// Binary layout: magic `HTFM`, u32 version, u64 rows, u64 cols, then
/// row-major f64 values, all little endian.
pub fn write_matrix_binary<W: Write>(m: &DenseMatrix, w: &mut W) -> std::io::Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&MATRIX_VERSION.to_le_bytes())?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for x in m.as_slice() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix_binary<R: Read>(r: &mut R) -> Result<DenseMatrix, VectorizeError> {
    let bad = |m: &str| VectorizeError::BadMatrixFile(m.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != MATRIX_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(|_| bad("truncated header"))?;
    if u32::from_le_bytes(b4) != MATRIX_VERSION {
        return Err(bad("unsupported version"));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(|_| bad("truncated header"))?;
    let rows = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8).map_err(|_| bad("truncated header"))?;
    let cols = u64::from_le_bytes(b8) as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        r.read_exact(&mut b8).map_err(|_| bad("truncated data"))?;
        data.push(f64::from_le_bytes(b8));
    }
    Ok(DenseMatrix::from_vec(rows, cols, data))
}

/// Fitted state needed to vectorize new tweets exactly as the training
/// tweets were, including the fitted TFIDF model and standardizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub spec: FeatureSpec,
    pub tfidf: Option<TfidfModel>,
    pub standardizers: Vec<Standardizer>,
    pub block_widths: Vec<usize>,
}

impl FeaturePipeline {
    /// Builds features for the fitting documents and records the
    /// standardization fitted on them.
    pub fn fit(
        spec: &FeatureSpec,
        docs: &[TokenStream],
        tfidf: Option<TfidfModel>,
        resources: &Resources,
    ) -> Result<(FeaturePipeline, FeatureMatrix), VectorizeError> {
        if spec.blocks.is_empty() {
            return Err(VectorizeError::EmptySpec);
        }
        if spec.contains(Block::Tfidf) && tfidf.is_none() {
            return Err(VectorizeError::MissingResource(Block::Tfidf));
        }
        let mut pipeline = FeaturePipeline {
            spec: spec.clone(),
            tfidf: tfidf.map(restore_tfidf),
            standardizers: Vec::new(),
            block_widths: Vec::new(),
        };
        let raw = pipeline.raw_blocks(docs, resources)?;
        pipeline.block_widths = raw.iter().map(|(m, _)| m.cols()).collect();
        if spec.standardize {
            pipeline.standardizers = raw.iter().map(|(m, _)| Standardizer::fit(m)).collect();
        }
        let matrix = pipeline.assemble(raw, docs);
        Ok((pipeline, matrix))
    }

    pub fn transform(&self, docs: &[TokenStream], resources: &Resources) -> Result<FeatureMatrix, VectorizeError> {
        let raw = self.raw_blocks(docs, resources)?;
        for ((m, _), &w) in raw.iter().zip(&self.block_widths) {
            if m.cols() != w {
                return Err(VectorizeError::DimensionMismatch {
                    expected: w,
                    actual: m.cols(),
                });
            }
        }
        Ok(self.assemble(raw, docs))
    }

    pub fn width(&self) -> usize {
        self.block_widths.iter().sum()
    }

    fn raw_blocks(
        &self,
        docs: &[TokenStream],
        resources: &Resources,
    ) -> Result<Vec<(DenseMatrix, Vec<String>)>, VectorizeError> {
        self.spec
            .blocks
            .iter()
            .map(|b| raw_block(b, docs, self.tfidf.as_ref(), resources))
            .collect()
    }

    fn assemble(&self, raw: Vec<(DenseMatrix, Vec<String>)>, docs: &[TokenStream]) -> FeatureMatrix {
        let mut matrix = DenseMatrix::zeros(docs.len(), 0);
        let mut offsets = Vec::with_capacity(raw.len());
        let mut labels = Vec::new();
        for (i, (mut block, block_labels)) in raw.into_iter().enumerate() {
            if let Some(s) = self.standardizers.get(i) {
                s.apply(&mut block);
            }
            let start = matrix.cols();
            matrix = matrix.hstack(&block);
            offsets.push(start..matrix.cols());
            labels.extend(block_labels);
        }
        FeatureMatrix {
            matrix,
            row_ids: docs.iter().map(|d| d.source_id.clone()).collect(),
            spec: self.spec.clone(),
            block_offsets: offsets,
            column_labels: labels,
        }
    }
}

fn raw_block(
    spec: &BlockSpec,
    docs: &[TokenStream],
    tfidf: Option<&TfidfModel>,
    resources: &Resources,
) -> Result<(DenseMatrix, Vec<String>), VectorizeError> {
    let block = spec.block;
    let prefix = block.notation();
    match block {
        Block::Tfidf => {
            let model = tfidf.ok_or(VectorizeError::MissingResource(block))?;
            let mut m = DenseMatrix::zeros(docs.len(), model.width());
            for (i, d) in docs.iter().enumerate() {
                let v = model.transform(d);
                let row = m.row_mut(i);
                for (&c, &x) in v.indices.iter().zip(&v.values) {
                    row[c] = x;
                }
            }
            let labels = model.vocabulary().iter().map(|w| format!("{prefix}.{w}")).collect();
            Ok((m, labels))
        }
        Block::Liwc => {
            let lexicon = resources
                .lexicon
                .as_ref()
                .ok_or(VectorizeError::MissingResource(block))?;
            let rows: Vec<Vec<f64>> = docs
                .iter()
                .map(|d| liwc_vector(lexicon, d).to_features())
                .collect();
            let labels = liwc_feature_names(lexicon)
                .into_iter()
                .map(|n| format!("{prefix}.{n}"))
                .collect();
            Ok((DenseMatrix::from_vec(docs.len(), lexicon.len() + 1, rows.concat()), labels))
        }
        _ => {
            let table = resources.table(block)?;
            let width = table.composed_width(spec.composition);
            let mut data = Vec::with_capacity(docs.len() * width);
            for d in docs {
                data.extend(table.compose_tweet(d, spec.composition));
            }
            let labels = (0..width).map(|i| format!("{prefix}.{i}")).collect();
            Ok((DenseMatrix::from_vec(docs.len(), width, data), labels))
        }
    }
}

pub fn corpus_streams(corpus: &Corpus) -> Vec<TokenStream> {
    corpus.iter().map(|t| tokenize_stream(t.id.clone(), &t.text)).collect()
}

/// Tokenizes the corpus, fits TFIDF when the feature spec needs it, and builds the
/// feature matrix.
pub fn build_features(
    corpus: &Corpus,
    spec: &FeatureSpec,
    resources: &Resources,
) -> Result<(FeaturePipeline, FeatureMatrix), VectorizeError> {
    let docs = corpus_streams(corpus);
    let tfidf = if spec.contains(Block::Tfidf) {
        Some(fit_tfidf(&docs, Norm::L2)?)
    } else {
        None
    };
    FeaturePipeline::fit(spec, &docs, tfidf, resources)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize_stream;

    fn docs(texts: &[&str]) -> Vec<TokenStream> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| tokenize_stream(format!("d{i}"), t))
            .collect()
    }

    #[test]
    fn idf_values() {
        let model = fit_tfidf(&docs(&["a b", "a"]), Norm::L2).unwrap();
        assert_eq!(model.vocabulary(), ["a", "b"]);
        assert_eq!(model.idf()[0], 1.0);
        assert!((model.idf()[1] - (1.5f64.ln() + 1.0)).abs() < 1e-15);
        assert!((model.idf()[1] - 1.4055).abs() < 1e-4);
        assert!(matches!(fit_tfidf(&[], Norm::L2), Err(VectorizeError::EmptyCorpus)));
    }

    #[test]
    fn transform_examples() {
        let model = fit_tfidf(&docs(&["a b", "a"]), Norm::L2).unwrap();
        let v = model.transform(&tokenize_stream("q", "a a b"));
        assert_eq!(v.indices, [0, 1]);
        let idf_b = 1.5f64.ln() + 1.0;
        let norm = (4.0 + idf_b * idf_b).sqrt();
        assert!((v.values[0] - 2.0 / norm).abs() < 1e-15);
        assert!((v.values[1] - idf_b / norm).abs() < 1e-15);
        // 0.81817.., 0.57498..
        assert!((v.values[0] - 0.8182).abs() < 1e-4);
        assert!((v.values[1] - 0.5750).abs() < 1e-4);
        let empty = model.transform(&tokenize_stream("q", "zzz"));
        assert!(empty.indices.is_empty() && empty.norm() == 0.0);
        let single = model.transform(&tokenize_stream("q", "b"));
        assert_eq!(single.values, [1.0]);
    }

    #[test]
    fn spec_parsing() {
        let spec = FeatureSpec::parse("F(S)+L+T").unwrap();
        let blocks: Vec<Block> = spec.blocks.iter().map(|b| b.block).collect();
        assert_eq!(blocks, [Block::SubwordSkipGram, Block::Liwc, Block::Tfidf]);
        assert_eq!(spec.to_string(), "F(S)+L+T");
        assert_eq!(FeatureSpec::parse(" F (S) + W(S) ").unwrap().to_string(), "F(S)+W(S)");
        assert_eq!(FeatureSpec::parse("T").unwrap().blocks.len(), 1);
        assert!(matches!(FeatureSpec::parse("F(S)+F(S)"), Err(VectorizeError::DuplicateBlock(_))));
        assert!(matches!(FeatureSpec::parse("t"), Err(VectorizeError::UnknownBlock(_))));
        assert!(matches!(FeatureSpec::parse("T+"), Err(VectorizeError::UnknownBlock(_))));
        assert!(matches!(FeatureSpec::parse("  "), Err(VectorizeError::EmptySpec)));
    }

    #[test]
    fn widths_add_up() {
        let lexicon = CategoryLexicon::parse("[a]\nx\n[b]\ny*\n").unwrap();
        let resources = Resources::default().with_lexicon(lexicon);
        let d = docs(&["x y", "y z", "x"]);
        let tfidf = fit_tfidf(&d, Norm::L2).unwrap();
        let (_, only_t) = FeaturePipeline::fit(&"T".parse().unwrap(), &d, Some(tfidf.clone()), &resources).unwrap();
        assert_eq!(only_t.width(), 3);
        let (pipe, tl) = FeaturePipeline::fit(&"T+L".parse().unwrap(), &d, Some(tfidf), &resources).unwrap();
        assert_eq!(tl.width(), 3 + 2 + 1);
        assert_eq!(tl.block_offsets, [0..3, 3..6]);
        assert_eq!(tl.column_labels[3], "L.word_count");
        assert_eq!(pipe.transform(&d, &resources).unwrap(), tl);
    }

    #[test]
    fn missing_resources() {
        let d = docs(&["x"]);
        let r = Resources::default();
        assert!(matches!(
            FeaturePipeline::fit(&"T".parse().unwrap(), &d, None, &r),
            Err(VectorizeError::MissingResource(Block::Tfidf))
        ));
        assert!(matches!(
            FeaturePipeline::fit(&"L".parse().unwrap(), &d, None, &r),
            Err(VectorizeError::MissingResource(Block::Liwc))
        ));
        assert!(matches!(
            FeaturePipeline::fit(&"W(C)".parse().unwrap(), &d, None, &r),
            Err(VectorizeError::MissingResource(Block::WordCbow))
        ));
    }

    #[test]
    fn binary_matrix_round_trip() {
        let m = DenseMatrix::from_rows(&[vec![1.5, -0.0, f64::MIN_POSITIVE], vec![3.0, 1e300, -7.25]]);
        let mut buf = Vec::new();
        write_matrix_binary(&m, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 8 + 6 * 8);
        let back = read_matrix_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert!(read_matrix_binary(&mut &buf[..20]).is_err());
    }
}
