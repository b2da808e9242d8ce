//! Labeled tweet corpora: ingestion, annotation consensus, agreement,
//! balanced under-sampling and stratified fold plans.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::hash::Hash;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::SystemTime;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("unknown harassment type `{0}`")]
    UnknownType(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("unknown annotation vote `{0}`")]
    UnknownVote(String),
    #[error("duplicate tweet id `{0}`")]
    DuplicateId(String),
    #[error("tweet `{0}` has empty text")]
    EmptyText(String),
    #[error("tweet `{id}` is labeled {label} but its votes reach the opposite consensus")]
    LabelVoteConflict { id: String, label: Label },
    #[error("annotation lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("annotation lists are empty")]
    EmptyAnnotations,
    #[error("corpus lacks one of the two binary labels")]
    SingleClassCorpus,
    #[error("cannot split {items} items into {k} folds")]
    TooFewItems { items: usize, k: usize },
    #[error("invalid fold configuration: {0}")]
    InvalidFolds(String),
}

impl CorpusError {
    fn csv(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        CorpusError::MalformedRow {
            line,
            reason: err.to_string(),
        }
    }
}

/// The five contextual harassment types, with stable codes 0..4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HarassmentType {
    Sexual = 0,
    Racial = 1,
    Appearance = 2,
    Intellectual = 3,
    Political = 4,
}

impl HarassmentType {
    pub const ALL: [HarassmentType; 5] = [
        HarassmentType::Sexual,
        HarassmentType::Racial,
        HarassmentType::Appearance,
        HarassmentType::Intellectual,
        HarassmentType::Political,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// Lowercase identifier used in corpus files and label spaces.
    pub fn name(self) -> &'static str {
        match self {
            HarassmentType::Sexual => "sexual",
            HarassmentType::Racial => "racial",
            HarassmentType::Appearance => "appearance",
            HarassmentType::Intellectual => "intellectual",
            HarassmentType::Political => "political",
        }
    }

    /// Row title used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            HarassmentType::Sexual => "Sexual",
            HarassmentType::Racial => "Racial",
            HarassmentType::Appearance => "Appearance-related",
            HarassmentType::Intellectual => "Intellectual",
            HarassmentType::Political => "Political",
        }
    }
}

impl fmt::Display for HarassmentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HarassmentType {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sexual" => Ok(HarassmentType::Sexual),
            "racial" => Ok(HarassmentType::Racial),
            "appearance" | "appearance-related" => Ok(HarassmentType::Appearance),
            "intellectual" => Ok(HarassmentType::Intellectual),
            "political" => Ok(HarassmentType::Political),
            _ => Err(CorpusError::UnknownType(s.trim().to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationVote {
    Yes,
    No,
    Other,
}

impl AnnotationVote {
    pub fn name(self) -> &'static str {
        match self {
            AnnotationVote::Yes => "yes",
            AnnotationVote::No => "no",
            AnnotationVote::Other => "other",
        }
    }
}

impl FromStr for AnnotationVote {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "y" => Ok(AnnotationVote::Yes),
            "no" | "n" => Ok(AnnotationVote::No),
            "other" | "o" => Ok(AnnotationVote::Other),
            _ => Err(CorpusError::UnknownVote(s.trim().to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Harassing,
    #[serde(rename = "nonharassing")]
    NonHarassing,
}

impl Label {
    pub fn name(self) -> &'static str {
        match self {
            Label::Harassing => "harassing",
            Label::NonHarassing => "nonharassing",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "harassing" | "1" | "yes" => Ok(Label::Harassing),
            "nonharassing" | "non-harassing" | "non_harassing" | "0" | "no" => {
                Ok(Label::NonHarassing)
            }
            _ => Err(CorpusError::UnknownLabel(s.trim().to_string())),
        }
    }
}

/// Outcome of the two-vote consensus rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Consensus {
    Harassing,
    NonHarassing,
    Undecidable,
}

impl Consensus {
    pub fn label(self) -> Option<Label> {
        match self {
            Consensus::Harassing => Some(Label::Harassing),
            Consensus::NonHarassing => Some(Label::NonHarassing),
            Consensus::Undecidable => None,
        }
    }
}

/// At least two `yes` votes make a tweet harassing, at least two `no` votes
/// non-harassing; anything else has no consensus.
pub fn consensus_label(votes: &[AnnotationVote]) -> Consensus {
    let yes = votes.iter().filter(|v| **v == AnnotationVote::Yes).count();
    let no = votes.iter().filter(|v| **v == AnnotationVote::No).count();
    // With more than three annotators both counts could reach two; the
    // larger side wins and a tie stays undecidable.
    match (yes >= 2, no >= 2) {
        (true, false) => Consensus::Harassing,
        (false, true) => Consensus::NonHarassing,
        (true, true) if yes > no => Consensus::Harassing,
        (true, true) if no > yes => Consensus::NonHarassing,
        _ => Consensus::Undecidable,
    }
}

/// Cohen's kappa between two annotators over the same items.
///
/// Computed from integer tallies, so the result is exactly symmetric in its
/// arguments. Returns 1.0 when chance agreement is total (both annotators used
/// a single identical category throughout).
pub fn cohen_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, CorpusError> {
    if a.len() != b.len() {
        return Err(CorpusError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(CorpusError::EmptyAnnotations);
    }
    let n = a.len() as u128;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;

    let mut marginals: HashMap<&T, (u128, u128)> = HashMap::new();
    for x in a {
        marginals.entry(x).or_default().0 += 1;
    }
    for y in b {
        marginals.entry(y).or_default().1 += 1;
    }
    let chance: u128 = marginals.values().map(|(ca, cb)| ca * cb).sum();

    let denominator = n * n - chance;
    if denominator == 0 {
        return Ok(1.0);
    }
    let numerator = (agree * n) as f64 - chance as f64;
    Ok(numerator / denominator as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTweet {
    pub id: String,
    pub text: String,
    pub harassment_type: HarassmentType,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub votes: Option<Vec<AnnotationVote>>,
}

impl LabeledTweet {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        harassment_type: HarassmentType,
        label: Label,
    ) -> Self {
        LabeledTweet {
            id: id.into(),
            text: text.into(),
            harassment_type,
            label,
            votes: None,
        }
    }

    pub fn is_harassing(&self) -> bool {
        self.label == Label::Harassing
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    pub loaded_at: Option<SystemTime>,
    /// Rows dropped at load time because their votes had no consensus.
    pub dropped_undecidable: usize,
}

/// An ordered collection of labeled tweets with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    tweets: Vec<LabeledTweet>,
    pub provenance: Provenance,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.tweets == other.tweets
    }
}

impl Corpus {
    pub fn new(tweets: Vec<LabeledTweet>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(tweets.len());
        for t in &tweets {
            if t.text.trim().is_empty() {
                return Err(CorpusError::EmptyText(t.id.clone()));
            }
            if !seen.insert(t.id.as_str()) {
                return Err(CorpusError::DuplicateId(t.id.clone()));
            }
            if let Some(votes) = &t.votes {
                if let Some(consensus) = consensus_label(votes).label() {
                    if consensus != t.label {
                        return Err(CorpusError::LabelVoteConflict {
                            id: t.id.clone(),
                            label: t.label,
                        });
                    }
                }
            }
        }
        Ok(Corpus {
            tweets,
            provenance: Provenance::default(),
        })
    }

    /// Builds a sub-corpus from tweets already known to satisfy the invariants.
    fn derived(&self, tweets: Vec<LabeledTweet>) -> Corpus {
        Corpus {
            tweets,
            provenance: self.provenance.clone(),
        }
    }

    pub fn tweets(&self) -> &[LabeledTweet] {
        &self.tweets
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledTweet> {
        self.tweets.iter()
    }

    pub fn count(&self, harassment_type: Option<HarassmentType>, label: Option<Label>) -> usize {
        self.tweets
            .iter()
            .filter(|t| harassment_type.is_none_or(|h| t.harassment_type == h))
            .filter(|t| label.is_none_or(|l| t.label == l))
            .count()
    }

    /// SHA-256 over the canonical (id, text, type, label) rows, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.tweets {
            hasher.update(t.id.as_bytes());
            hasher.update([0x1f]);
            hasher.update(t.text.as_bytes());
            hasher.update([0x1f, t.harassment_type.code(), 0x1f]);
            hasher.update(t.label.name().as_bytes());
            hasher.update([0x1e]);
        }
        hex::encode(hasher.finalize())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a LabeledTweet;
    type IntoIter = std::slice::Iter<'a, LabeledTweet>;

    fn into_iter(self) -> Self::IntoIter {
        self.tweets.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Tsv,
}

impl CorpusFormat {
    /// `.tsv`/`.tab` files are tab separated, everything else comma separated.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") || ext.eq_ignore_ascii_case("tab") => {
                CorpusFormat::Tsv
            }
            _ => CorpusFormat::Csv,
        }
    }

    fn delimiter(self) -> u8 {
        match self {
            CorpusFormat::Csv => b',',
            CorpusFormat::Tsv => b'\t',
        }
    }
}

struct Columns {
    id: usize,
    text: usize,
    harassment_type: usize,
    label: Option<usize>,
    votes: Option<usize>,
}

impl Columns {
    fn locate(headers: &csv::StringRecord, need_label: bool) -> Result<Self, CorpusError> {
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name))
        };
        let label = find("label");
        if need_label && label.is_none() {
            return Err(CorpusError::MissingColumn("label"));
        }
        Ok(Columns {
            id: find("id").ok_or(CorpusError::MissingColumn("id"))?,
            text: find("text").ok_or(CorpusError::MissingColumn("text"))?,
            harassment_type: find("type").ok_or(CorpusError::MissingColumn("type"))?,
            label,
            votes: find("votes"),
        })
    }
}

fn csv_reader<R: Read>(reader: R, format: CorpusFormat) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn parse_votes(field: &str) -> Result<Option<Vec<AnnotationVote>>, CorpusError> {
    if field.trim().is_empty() {
        return Ok(None);
    }
    field
        .split('|')
        .map(str::parse)
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Reads a corpus from CSV/TSV text with header `id,text,type,label[,votes]`.
///
/// Rows whose votes have no two-vote consensus are dropped and counted in
/// the provenance.
pub fn read_corpus<R: Read>(reader: R, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let mut rdr = csv_reader(reader, format);
    let headers = rdr.headers().map_err(CorpusError::csv)?.clone();
    let cols = Columns::locate(&headers, true)?;
    let label_col = cols.label.expect("label column checked");

    let mut tweets = Vec::new();
    let mut dropped = 0;
    for record in rdr.records() {
        let record = record.map_err(CorpusError::csv)?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let line = record_line(&record);
        let id = field(cols.id).to_string();
        if id.is_empty() {
            return Err(CorpusError::MalformedRow {
                line,
                reason: "empty id".into(),
            });
        }
        let harassment_type: HarassmentType = field(cols.harassment_type).parse()?;
        let votes = match cols.votes {
            Some(c) => parse_votes(field(c))?,
            None => None,
        };
        if let Some(v) = &votes {
            if consensus_label(v) == Consensus::Undecidable {
                dropped += 1;
                continue;
            }
        }
        let label: Label = field(label_col).parse()?;
        tweets.push(LabeledTweet {
            id,
            text: field(cols.text).to_string(),
            harassment_type,
            label,
            votes,
        });
    }
    let mut corpus = Corpus::new(tweets)?;
    corpus.provenance.dropped_undecidable = dropped;
    Ok(corpus)
}

pub fn load_corpus(path: &Path, format: Option<CorpusFormat>) -> Result<Corpus, CorpusError> {
    let format = format.unwrap_or_else(|| CorpusFormat::from_path(path));
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut corpus = read_corpus(std::io::BufReader::new(file), format)?;
    corpus.provenance.source = Some(path.to_path_buf());
    corpus.provenance.loaded_at = Some(SystemTime::now());
    Ok(corpus)
}

pub fn write_corpus<W: Write>(
    corpus: &Corpus,
    writer: W,
    format: CorpusFormat,
) -> Result<(), CorpusError> {
    let with_votes = corpus.iter().any(|t| t.votes.is_some());
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(format.delimiter())
        .from_writer(writer);
    let mut header = vec!["id", "text", "type", "label"];
    if with_votes {
        header.push("votes");
    }
    wtr.write_record(&header).map_err(CorpusError::csv)?;
    for t in corpus {
        let mut row = vec![
            t.id.clone(),
            t.text.clone(),
            t.harassment_type.name().to_string(),
            t.label.name().to_string(),
        ];
        if with_votes {
            let votes = t
                .votes
                .as_deref()
                .unwrap_or_default()
                .iter()
                .map(|v| v.name())
                .collect::<Vec<_>>()
                .join("|");
            row.push(votes);
        }
        wtr.write_record(&row).map_err(CorpusError::csv)?;
    }
    wtr.flush().map_err(|source| CorpusError::Io {
        path: PathBuf::new(),
        source,
    })
}

pub fn save_corpus(corpus: &Corpus, path: &Path, format: Option<CorpusFormat>) -> Result<(), CorpusError> {
    let format = format.unwrap_or_else(|| CorpusFormat::from_path(path));
    let file = std::fs::File::create(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_corpus(corpus, std::io::BufWriter::new(file), format)
}

/// Raw annotation record, kept regardless of consensus, for agreement studies.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteRecord {
    pub id: String,
    pub harassment_type: HarassmentType,
    pub votes: Vec<AnnotationVote>,
}

/// Reads every row that carries votes from a corpus-format file, including
/// rows without consensus. The label column is ignored.
pub fn load_votes(path: &Path, format: Option<CorpusFormat>) -> Result<Vec<VoteRecord>, CorpusError> {
    let format = format.unwrap_or_else(|| CorpusFormat::from_path(path));
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv_reader(std::io::BufReader::new(file), format);
    let headers = rdr.headers().map_err(CorpusError::csv)?.clone();
    let cols = Columns::locate(&headers, false)?;
    let votes_col = cols.votes.ok_or(CorpusError::MissingColumn("votes"))?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(CorpusError::csv)?;
        let field = |i: usize| record.get(i).unwrap_or("");
        if let Some(votes) = parse_votes(field(votes_col))? {
            out.push(VoteRecord {
                id: field(cols.id).to_string(),
                harassment_type: field(cols.harassment_type).parse()?,
                votes,
            });
        }
    }
    Ok(out)
}

/// Tweets matching the type and/or label. Passing only a label yields the
/// combined harassing or non-harassing view.
pub fn filter_by_type(
    corpus: &Corpus,
    harassment_type: Option<HarassmentType>,
    label: Option<Label>,
) -> Corpus {
    let tweets = corpus
        .iter()
        .filter(|t| harassment_type.is_none_or(|h| t.harassment_type == h))
        .filter(|t| label.is_none_or(|l| t.label == l))
        .cloned()
        .collect();
    corpus.derived(tweets)
}

/// Keeps every minority-class tweet plus an equal-size seeded sample of the
/// majority class. Original corpus order is preserved.
pub fn balanced_undersample(corpus: &Corpus, seed: u64) -> Result<Corpus, CorpusError> {
    let (pos, neg): (Vec<usize>, Vec<usize>) =
        (0..corpus.len()).partition(|&i| corpus.tweets[i].is_harassing());
    if pos.is_empty() || neg.is_empty() {
        return Err(CorpusError::SingleClassCorpus);
    }
    let (minority, majority) = if pos.len() <= neg.len() {
        (pos, neg)
    } else {
        (neg, pos)
    };
    let mut rng = rng::seeded(seed);
    let picked = rand::seq::index::sample(&mut rng, majority.len(), minority.len());
    let mut keep = vec![false; corpus.len()];
    for i in &minority {
        keep[*i] = true;
    }
    for j in picked.iter() {
        keep[majority[j]] = true;
    }
    let tweets = corpus
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(t, _)| t.clone())
        .collect();
    Ok(corpus.derived(tweets))
}

/// Six-class corpus: the harassing tweets of every type plus a seeded sample
/// of non-harassing tweets. The non-harassing sample defaults to the mean
/// size of the five type classes.
pub fn multiclass_sample(
    corpus: &Corpus,
    nonharassing_size: Option<usize>,
    seed: u64,
) -> Result<Corpus, CorpusError> {
    let neg: Vec<usize> = (0..corpus.len())
        .filter(|&i| !corpus.tweets[i].is_harassing())
        .collect();
    let harassing = corpus.len() - neg.len();
    if harassing == 0 || neg.is_empty() {
        return Err(CorpusError::SingleClassCorpus);
    }
    let target = nonharassing_size
        .unwrap_or_else(|| (harassing as f64 / HarassmentType::ALL.len() as f64).round() as usize)
        .clamp(1, neg.len());
    let mut rng = rng::seeded(seed);
    let picked = rand::seq::index::sample(&mut rng, neg.len(), target);
    let mut keep: Vec<bool> = corpus.iter().map(LabeledTweet::is_harassing).collect();
    for j in picked.iter() {
        keep[neg[j]] = true;
    }
    let tweets = corpus
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(t, _)| t.clone())
        .collect();
    Ok(corpus.derived(tweets))
}

/// Stratified, repeated k-fold assignment of item indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    /// `assignments[r][i]` is the fold of item `i` in repeat `r`.
    pub assignments: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn n_items(&self) -> usize {
        self.assignments.first().map_or(0, Vec::len)
    }

    /// `(train, test)` index lists for one fold of one repeat, ascending.
    pub fn split(&self, repeat: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments[repeat].iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Fold plan stratified by binary label.
pub fn make_folds(corpus: &Corpus, k: usize, repeats: usize, seed: u64) -> Result<FoldPlan, CorpusError> {
    let strata: Vec<usize> = corpus
        .iter()
        .map(|t| usize::from(t.is_harassing()))
        .collect();
    make_folds_stratified(&strata, k, repeats, seed)
}

/// Fold plan stratified by arbitrary class keys (one per item).
///
/// Each stratum is shuffled and dealt round-robin, continuing the deal across
/// strata, so per-stratum fold counts and total fold sizes each differ by at
/// most one. Fold labels are permuted per repeat.
pub fn make_folds_stratified(
    strata: &[usize],
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<FoldPlan, CorpusError> {
    if k < 2 {
        return Err(CorpusError::InvalidFolds(format!("k must be at least 2, got {k}")));
    }
    if repeats == 0 {
        return Err(CorpusError::InvalidFolds("repeats must be positive".into()));
    }
    if strata.len() < k {
        return Err(CorpusError::TooFewItems {
            items: strata.len(),
            k,
        });
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &s) in strata.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }

    let mut assignments = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut rng = rng::seeded(rng::derive(seed, r as u64));
        let mut fold_labels: Vec<usize> = (0..k).collect();
        fold_labels.shuffle(&mut rng);
        let mut assignment = vec![0usize; strata.len()];
        let mut position = 0usize;
        for members in groups.values() {
            let mut members = members.clone();
            members.shuffle(&mut rng);
            for i in members {
                assignment[i] = fold_labels[position % k];
                position += 1;
            }
        }
        assignments.push(assignment);
    }
    Ok(FoldPlan {
        k,
        repeats,
        seed,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use AnnotationVote::*;

    fn tweet(id: &str, ty: HarassmentType, label: Label) -> LabeledTweet {
        LabeledTweet::new(id, format!("text of {id}"), ty, label)
    }

    #[test]
    fn consensus_rule() {
        assert_eq!(consensus_label(&[Yes, Yes, No]), Consensus::Harassing);
        assert_eq!(consensus_label(&[Yes, No, Other]), Consensus::Undecidable);
        assert_eq!(consensus_label(&[No, No]), Consensus::NonHarassing);
        assert_eq!(consensus_label(&[Yes]), Consensus::Undecidable);
        assert_eq!(consensus_label(&[Yes, Yes, No, No]), Consensus::Undecidable);
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(cohen_kappa(&["y", "n", "y"], &["y", "n", "y"]).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&[Yes, Yes, No, No], &[Yes, No, Yes, No]).unwrap(), 0.0);
        let k = cohen_kappa(&[Yes, Yes, Yes, No], &[Yes, Yes, No, No]).unwrap();
        assert!((k - 0.5).abs() < 1e-15);
        assert_eq!(cohen_kappa(&[Yes, Yes], &[Yes, Yes]).unwrap(), 1.0);
        assert!(matches!(
            cohen_kappa(&[Yes], &[Yes, No]),
            Err(CorpusError::LengthMismatch(1, 2))
        ));
        assert!(matches!(
            cohen_kappa::<AnnotationVote>(&[], &[]),
            Err(CorpusError::EmptyAnnotations)
        ));
    }

    #[test]
    fn load_maps_fields() {
        let text = "id,text,type,label\nt1, 'she is dumb', intellectual, harassing\n";
        let corpus = read_corpus(text.as_bytes(), CorpusFormat::Csv).unwrap();
        assert_eq!(corpus.len(), 1);
        let t = &corpus.tweets()[0];
        assert_eq!(t.id, "t1");
        assert_eq!(t.text, "'she is dumb'");
        assert_eq!(t.harassment_type, HarassmentType::Intellectual);
        assert_eq!(t.label, Label::Harassing);
    }

    #[test]
    fn load_rejects_bad_rows() {
        let dup = "id,text,type,label\nt1,a,racial,harassing\nt1,b,racial,nonharassing\n";
        assert!(matches!(
            read_corpus(dup.as_bytes(), CorpusFormat::Csv),
            Err(CorpusError::DuplicateId(id)) if id == "t1"
        ));
        let unknown = "id,text,type,label\nt1,a,religious,harassing\n";
        assert!(matches!(
            read_corpus(unknown.as_bytes(), CorpusFormat::Csv),
            Err(CorpusError::UnknownType(v)) if v == "religious"
        ));
        let empty = "id,text,type,label\nt1,   ,racial,harassing\n";
        assert!(matches!(
            read_corpus(empty.as_bytes(), CorpusFormat::Csv),
            Err(CorpusError::EmptyText(_))
        ));
        let ragged = "id,text,type,label\nt1,a,racial\n";
        assert!(matches!(
            read_corpus(ragged.as_bytes(), CorpusFormat::Csv),
            Err(CorpusError::MalformedRow { line: 2, .. })
        ));
        let missing = "id,text,label\nt1,a,harassing\n";
        assert!(matches!(
            read_corpus(missing.as_bytes(), CorpusFormat::Csv),
            Err(CorpusError::MissingColumn("type"))
        ));
    }

    #[test]
    fn load_drops_undecidable_and_checks_votes() {
        let text = "id\ttext\ttype\tlabel\tvotes\n\
                    a\tx\tsexual\tharassing\tyes|yes|no\n\
                    b\ty\tsexual\tharassing\tyes|no|other\n\
                    c\tz\tsexual\tnonharassing\t\n";
        let corpus = read_corpus(text.as_bytes(), CorpusFormat::Tsv).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.provenance.dropped_undecidable, 1);
        assert_eq!(corpus.tweets()[1].votes, None);

        let conflict = "id,text,type,label,votes\na,x,sexual,nonharassing,yes|yes|no\n";
        assert!(matches!(
            read_corpus(conflict.as_bytes(), CorpusFormat::Csv),
            Err(CorpusError::LabelVoteConflict { .. })
        ));
    }

    #[test]
    fn quoted_text_survives_round_trip() {
        let mut t = tweet("q", HarassmentType::Racial, Label::Harassing);
        t.text = "she said \"no, never\"\nthen left".into();
        t.votes = Some(vec![Yes, Yes, Other]);
        let corpus = Corpus::new(vec![t, tweet("r", HarassmentType::Sexual, Label::NonHarassing)]).unwrap();
        let mut buf = Vec::new();
        write_corpus(&corpus, &mut buf, CorpusFormat::Csv).unwrap();
        let back = read_corpus(buf.as_slice(), CorpusFormat::Csv).unwrap();
        assert_eq!(back, corpus);
    }

    #[test]
    fn filtering() {
        let mut tweets = Vec::new();
        for i in 0..5 {
            tweets.push(tweet(&format!("r{i}"), HarassmentType::Racial, Label::Harassing));
        }
        for i in 0..3 {
            tweets.push(tweet(&format!("s{i}"), HarassmentType::Sexual, Label::NonHarassing));
        }
        let corpus = Corpus::new(tweets).unwrap();
        assert_eq!(filter_by_type(&corpus, Some(HarassmentType::Racial), None).len(), 5);
        assert_eq!(filter_by_type(&corpus, None, Some(Label::NonHarassing)).len(), 3);
        assert_eq!(
            filter_by_type(&corpus, Some(HarassmentType::Sexual), Some(Label::Harassing)).len(),
            0
        );
        assert!(filter_by_type(&Corpus::default(), Some(HarassmentType::Racial), None).is_empty());
    }

    fn sized(pos: usize, neg: usize) -> Corpus {
        let mut tweets = Vec::new();
        for i in 0..pos {
            tweets.push(tweet(&format!("p{i}"), HarassmentType::Sexual, Label::Harassing));
        }
        for i in 0..neg {
            tweets.push(tweet(&format!("n{i}"), HarassmentType::Sexual, Label::NonHarassing));
        }
        Corpus::new(tweets).unwrap()
    }

    #[test]
    fn undersampling_sizes() {
        let sexual = balanced_undersample(&sized(230, 3619), 7).unwrap();
        assert_eq!(sexual.len(), 460);
        assert_eq!(sexual.count(None, Some(Label::Harassing)), 230);
        let intellectual = balanced_undersample(&sized(811, 4056), 7).unwrap();
        assert_eq!(intellectual.len(), 1622);
        let even = sized(3, 3);
        assert_eq!(balanced_undersample(&even, 1).unwrap(), even);
        assert!(matches!(
            balanced_undersample(&sized(4, 0), 1),
            Err(CorpusError::SingleClassCorpus)
        ));
        assert_eq!(
            balanced_undersample(&sized(20, 90), 3).unwrap(),
            balanced_undersample(&sized(20, 90), 3).unwrap()
        );
    }

    #[test]
    fn folds_are_exactly_stratified() {
        let corpus = sized(50, 50);
        let plan = make_folds(&corpus, 10, 5, 42).unwrap();
        assert_eq!(plan.assignments.len(), 5);
        for r in 0..5 {
            for f in 0..10 {
                let (_, test) = plan.split(r, f);
                let pos = test.iter().filter(|&&i| corpus.tweets()[i].is_harassing()).count();
                assert_eq!((pos, test.len() - pos), (5, 5));
            }
        }
        let distinct: HashSet<_> = plan.assignments.iter().collect();
        assert_eq!(distinct.len(), 5);
        assert_eq!(plan, make_folds(&corpus, 10, 5, 42).unwrap());
        assert!(matches!(
            make_folds(&sized(2, 1), 10, 1, 0),
            Err(CorpusError::TooFewItems { items: 3, k: 10 })
        ));
        assert!(make_folds(&corpus, 1, 1, 0).is_err());
    }

    #[test]
    fn multiclass_sample_defaults_to_mean_type_size() {
        let mut tweets = Vec::new();
        for (n, ty) in [4, 6, 5, 5, 5].into_iter().zip(HarassmentType::ALL) {
            for i in 0..n {
                tweets.push(tweet(&format!("{ty}{i}"), ty, Label::Harassing));
            }
        }
        for i in 0..40 {
            tweets.push(tweet(&format!("n{i}"), HarassmentType::Political, Label::NonHarassing));
        }
        let corpus = Corpus::new(tweets).unwrap();
        let sample = multiclass_sample(&corpus, None, 9).unwrap();
        assert_eq!(sample.count(None, Some(Label::NonHarassing)), 5);
        assert_eq!(sample.count(None, Some(Label::Harassing)), 25);
    }
}
