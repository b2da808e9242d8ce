//! Category lexicons with prefix-wildcard matching, per-tweet category
//! percentage vectors, effect sizes between harassing and non-harassing
//! sub-corpora, and word frequency tables.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, HarassmentType, Label};
use crate::text::{tokenize, TokenStream};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("duplicate category `{0}`")]
    DuplicateCategory(String),
    #[error("bad pattern `{0}`: `*` is only allowed as the final character of a non-empty stem")]
    BadPattern(String),
    #[error("category `{0}` has no patterns")]
    EmptyCategory(String),
    #[error("effect size needs at least two values per group (got {experimental} and {control})")]
    TooFewValues { experimental: usize, control: usize },
    #[error("groups have different means but zero pooled standard deviation")]
    ZeroVariance,
    #[error("no {label} tweets for column `{column}`")]
    EmptyGroup { column: String, label: Label },
    #[error("feature `{feature}`, column `{column}`: {source}")]
    Cell {
        feature: String,
        column: String,
        #[source]
        source: Box<LexiconError>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    Literal(String),
    /// Stem without the trailing `*`.
    Prefix(String),
}

impl Pattern {
    pub fn parse(raw: &str) -> Result<Self, LexiconError> {
        let raw = raw.trim().to_lowercase();
        let bad = || LexiconError::BadPattern(raw.clone());
        match raw.find('*') {
            None if raw.is_empty() => Err(bad()),
            None => Ok(Pattern::Literal(raw)),
            Some(pos) if pos + 1 == raw.len() && pos > 0 => Ok(Pattern::Prefix(raw[..pos].to_string())),
            Some(_) => Err(bad()),
        }
    }

    pub fn matches(&self, token: &str) -> bool {
        match self {
            Pattern::Literal(w) => w == token,
            Pattern::Prefix(stem) => token.starts_with(stem.as_str()),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Literal(w) => f.write_str(w),
            Pattern::Prefix(stem) => write!(f, "{stem}*"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub patterns: Vec<Pattern>,
}

/// Ordered categories; the order fixes the layout of [`LiwcVector`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<Category>", into = "Vec<Category>")]
pub struct CategoryLexicon {
    categories: Vec<Category>,
    literals: HashMap<String, Vec<usize>>,
    prefixes: HashMap<String, Vec<usize>>,
    max_stem_chars: usize,
}

impl PartialEq for CategoryLexicon {
    fn eq(&self, other: &Self) -> bool {
        self.categories == other.categories
    }
}

impl TryFrom<Vec<Category>> for CategoryLexicon {
    type Error = LexiconError;

    fn try_from(categories: Vec<Category>) -> Result<Self, Self::Error> {
        CategoryLexicon::new(categories)
    }
}

impl From<CategoryLexicon> for Vec<Category> {
    fn from(lexicon: CategoryLexicon) -> Self {
        lexicon.categories
    }
}

impl CategoryLexicon {
    pub fn new(categories: Vec<Category>) -> Result<Self, LexiconError> {
        let mut names = HashSet::new();
        let mut literals: HashMap<String, Vec<usize>> = HashMap::new();
        let mut prefixes: HashMap<String, Vec<usize>> = HashMap::new();
        let mut max_stem_chars = 0;
        for (idx, cat) in categories.iter().enumerate() {
            if !names.insert(cat.name.clone()) {
                return Err(LexiconError::DuplicateCategory(cat.name.clone()));
            }
            if cat.patterns.is_empty() {
                return Err(LexiconError::EmptyCategory(cat.name.clone()));
            }
            for p in &cat.patterns {
                let (map, key) = match p {
                    Pattern::Literal(w) => (&mut literals, w),
                    Pattern::Prefix(stem) => {
                        if stem.is_empty() {
                            return Err(LexiconError::BadPattern("*".into()));
                        }
                        max_stem_chars = max_stem_chars.max(stem.chars().count());
                        (&mut prefixes, stem)
                    }
                };
                let slot = map.entry(key.clone()).or_default();
                if slot.last() != Some(&idx) {
                    slot.push(idx);
                }
            }
        }
        Ok(CategoryLexicon {
            categories,
            literals,
            prefixes,
            max_stem_chars,
        })
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.name.as_str())
    }

    /// Indices of every category with a literal equal to `token` or a prefix
    /// stem that starts `token`, ascending.
    pub fn match_token(&self, token: &str) -> BTreeSet<usize> {
        let mut hits = BTreeSet::new();
        if let Some(ids) = self.literals.get(token) {
            hits.extend(ids);
        }
        for (count, (end, c)) in token.char_indices().enumerate() {
            if count >= self.max_stem_chars {
                break;
            }
            if let Some(ids) = self.prefixes.get(&token[..end + c.len_utf8()]) {
                hits.extend(ids);
            }
        }
        hits
    }

    /// Parses the bracketed-section lexicon format:
    ///
    /// ```text
    /// # comment
    /// [anger]
    /// hate
    /// stupid*
    /// ```
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut categories: Vec<Category> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| LexiconError::ParseError {
                    line: line_no,
                    reason: format!("unterminated section header `{line}`"),
                })?;
                let name = name.trim();
                if name.is_empty() {
                    return Err(LexiconError::ParseError {
                        line: line_no,
                        reason: "empty category name".into(),
                    });
                }
                if categories.iter().any(|c| c.name == name) {
                    return Err(LexiconError::DuplicateCategory(name.to_string()));
                }
                categories.push(Category {
                    name: name.to_string(),
                    patterns: Vec::new(),
                });
                continue;
            }
            let current = categories.last_mut().ok_or_else(|| LexiconError::ParseError {
                line: line_no,
                reason: "pattern before the first [category] header".into(),
            })?;
            current.patterns.push(Pattern::parse(line)?);
        }
        CategoryLexicon::new(categories)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for cat in &self.categories {
            out.push('[');
            out.push_str(&cat.name);
            out.push_str("]\n");
            for p in &cat.patterns {
                out.push_str(&p.to_string());
                out.push('\n');
            }
        }
        out
    }
}

pub fn load_lexicon(path: &Path) -> Result<CategoryLexicon, LexiconError> {
    let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    CategoryLexicon::parse(&text)
}

/// Per-tweet category percentages (0..100) plus the word count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiwcVector {
    pub word_count: usize,
    pub values: Vec<f64>,
}

impl LiwcVector {
    /// `[word_count, category percentages...]`, the layout of the L block.
    pub fn to_features(&self) -> Vec<f64> {
        std::iter::once(self.word_count as f64)
            .chain(self.values.iter().copied())
            .collect()
    }
}

pub fn liwc_vector(lexicon: &CategoryLexicon, tweet: &TokenStream) -> LiwcVector {
    let mut hits = vec![0usize; lexicon.len()];
    let mut word_count = 0;
    for word in tweet.words() {
        word_count += 1;
        for idx in lexicon.match_token(word) {
            hits[idx] += 1;
        }
    }
    let values = if word_count == 0 {
        vec![0.0; lexicon.len()]
    } else {
        hits.iter()
            .map(|&h| 100.0 * h as f64 / word_count as f64)
            .collect()
    };
    LiwcVector { word_count, values }
}

/// Feature names in [`LiwcVector::to_features`] order.
pub fn liwc_feature_names(lexicon: &CategoryLexicon) -> Vec<String> {
    std::iter::once("word_count".to_string())
        .chain(lexicon.names().map(str::to_string))
        .collect()
}

/// Which standard deviation divides the mean difference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdKind {
    /// Pooled sample standard deviation (Cohen's d).
    #[default]
    Pooled,
    /// Sample standard deviation of the control group (Glass's delta).
    Control,
    /// Population standard deviation of both groups together.
    Population,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sum_sq_dev(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Standardized mean difference, experimental minus control, over the
/// pooled sample standard deviation.
pub fn effect_size(experimental: &[f64], control: &[f64]) -> Result<f64, LexiconError> {
    effect_size_with(experimental, control, StdKind::Pooled)
}

pub fn effect_size_with(
    experimental: &[f64],
    control: &[f64],
    kind: StdKind,
) -> Result<f64, LexiconError> {
    let (n1, n2) = (experimental.len(), control.len());
    if n1 < 2 || n2 < 2 {
        return Err(LexiconError::TooFewValues {
            experimental: n1,
            control: n2,
        });
    }
    let (m1, m2) = (mean(experimental), mean(control));
    let std = match kind {
        StdKind::Pooled => {
            let ss = sum_sq_dev(experimental, m1) + sum_sq_dev(control, m2);
            (ss / (n1 + n2 - 2) as f64).sqrt()
        }
        StdKind::Control => (sum_sq_dev(control, m2) / (n2 - 1) as f64).sqrt(),
        StdKind::Population => {
            let all: Vec<f64> = experimental.iter().chain(control).copied().collect();
            (sum_sq_dev(&all, mean(&all)) / all.len() as f64).sqrt()
        }
    };
    let diff = m1 - m2;
    if std == 0.0 {
        return if diff == 0.0 {
            Ok(0.0)
        } else {
            Err(LexiconError::ZeroVariance)
        };
    }
    Ok(diff / std)
}

/// A column of the effect-size table: one type or all types together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TypeColumn {
    Type(HarassmentType),
    Combined,
}

impl TypeColumn {
    pub fn all() -> Vec<TypeColumn> {
        HarassmentType::ALL
            .iter()
            .map(|&t| TypeColumn::Type(t))
            .chain(std::iter::once(TypeColumn::Combined))
            .collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            TypeColumn::Type(t) => t.name(),
            TypeColumn::Combined => "combined",
        }
    }

    fn includes(&self, t: HarassmentType) -> bool {
        match self {
            TypeColumn::Type(x) => *x == t,
            TypeColumn::Combined => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeTable {
    pub features: Vec<String>,
    pub columns: Vec<String>,
    /// `values[feature][column]`.
    pub values: Vec<Vec<f64>>,
}

impl EffectSizeTable {
    /// Keeps only features with `|e| > threshold` in at least one column.
    pub fn prune(&self, threshold: f64) -> EffectSizeTable {
        let (features, values) = self
            .features
            .iter()
            .zip(&self.values)
            .filter(|(_, row)| row.iter().any(|e| e.abs() > threshold))
            .map(|(f, row)| (f.clone(), row.clone()))
            .unzip();
        EffectSizeTable {
            features,
            columns: self.columns.clone(),
            values,
        }
    }

    pub fn get(&self, feature: &str, column: &str) -> Option<f64> {
        let r = self.features.iter().position(|f| f == feature)?;
        let c = self.columns.iter().position(|f| f == column)?;
        Some(self.values[r][c])
    }

    /// CSV with a `feature` column followed by one column per type.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (f, row) in self.features.iter().zip(&self.values) {
            out.push_str(f);
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Effect size of every lexicon feature (word count first) between the
/// harassing and non-harassing tweets of each requested column.
pub fn effect_size_table(
    corpus: &Corpus,
    lexicon: &CategoryLexicon,
    columns: &[TypeColumn],
    kind: StdKind,
) -> Result<EffectSizeTable, LexiconError> {
    let vectors: Vec<Vec<f64>> = corpus
        .iter()
        .map(|t| {
            let stream = TokenStream {
                source_id: t.id.clone(),
                tokens: tokenize(&t.text),
            };
            liwc_vector(lexicon, &stream).to_features()
        })
        .collect();
    let features = liwc_feature_names(lexicon);
    let mut values = vec![Vec::with_capacity(columns.len()); features.len()];

    for column in columns {
        let group = |label: Label| -> Vec<usize> {
            corpus
                .iter()
                .enumerate()
                .filter(|(_, t)| column.includes(t.harassment_type) && t.label == label)
                .map(|(i, _)| i)
                .collect()
        };
        let (exp_idx, ctl_idx) = (group(Label::Harassing), group(Label::NonHarassing));
        for (idx, label) in [(&exp_idx, Label::Harassing), (&ctl_idx, Label::NonHarassing)] {
            if idx.is_empty() {
                return Err(LexiconError::EmptyGroup {
                    column: column.name().to_string(),
                    label,
                });
            }
        }
        for (f, feature) in features.iter().enumerate() {
            let exp: Vec<f64> = exp_idx.iter().map(|&i| vectors[i][f]).collect();
            let ctl: Vec<f64> = ctl_idx.iter().map(|&i| vectors[i][f]).collect();
            let e = effect_size_with(&exp, &ctl, kind).map_err(|source| LexiconError::Cell {
                feature: feature.clone(),
                column: column.name().to_string(),
                source: Box::new(source),
            })?;
            values[f].push(e);
        }
    }
    Ok(EffectSizeTable {
        features,
        columns: columns.iter().map(|c| c.name().to_string()).collect(),
        values,
    })
}

/// Most frequent word tokens: descending count, ties lexicographic.
pub fn frequent_words(
    corpus: &Corpus,
    k: usize,
    stoplist: Option<&HashSet<String>>,
) -> Vec<(String, usize)> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in corpus {
        for tok in tokenize(&t.text) {
            if !tok.is_word() || stoplist.is_some_and(|s| s.contains(&tok.surface)) {
                continue;
            }
            *counts.entry(tok.surface).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

/// One lowercase token per line; blank lines and `#` comments skipped.
pub fn parse_stoplist(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledTweet;
    use crate::text::tokenize_stream;
    use proptest::prelude::*;

    fn lex(text: &str) -> CategoryLexicon {
        CategoryLexicon::parse(text).unwrap()
    }

    #[test]
    fn parse_lexicon() {
        let l = lex("[anger]\nhate\nstupid*\n");
        assert_eq!(l.len(), 1);
        assert_eq!(
            l.categories()[0].patterns,
            [Pattern::Literal("hate".into()), Pattern::Prefix("stupid".into())]
        );
        assert!(matches!(
            CategoryLexicon::parse("[a]\nst*pid\n"),
            Err(LexiconError::BadPattern(p)) if p == "st*pid"
        ));
        assert!(matches!(
            CategoryLexicon::parse("[a]\nx\n[a]\ny\n"),
            Err(LexiconError::DuplicateCategory(_))
        ));
        assert!(matches!(
            CategoryLexicon::parse("x\n"),
            Err(LexiconError::ParseError { line: 1, .. })
        ));
        assert!(CategoryLexicon::parse("[a]\n*\n").is_err());
        let six = "# demo\n[sexual]\nslut*\n[racial]\nnigg*\n[appearance]\nugly\n\
                   [intellectual]\ndumb*\n[political]\nlibtard*\n[generic]\nhate\n";
        assert_eq!(lex(six).len(), 6);
        assert_eq!(lex(&lex(six).to_text()), lex(six));
    }

    #[test]
    fn matching() {
        let l = lex("[anger]\nstupid*\n[insult]\nstupid\nidiot\n");
        assert_eq!(l.match_token("stupidest"), BTreeSet::from([0]));
        assert!(l.match_token("studious").is_empty());
        assert_eq!(l.match_token("stupid"), BTreeSet::from([0, 1]));
    }

    #[test]
    fn liwc_examples() {
        let l = lex("[anger]\nhate\n");
        let v = liwc_vector(&l, &tokenize_stream("a", "i hate mondays really"));
        assert_eq!(v.values, [25.0]);
        assert_eq!(v.word_count, 4);
        let empty = liwc_vector(&l, &tokenize_stream("b", ""));
        assert_eq!((empty.word_count, empty.values), (0, vec![0.0]));
        let l = lex("[second_person]\nyou\n[intellect]\nstupid*\n");
        let v = liwc_vector(&l, &tokenize_stream("c", "you are so stupid stupid"));
        assert_eq!(v.values, [20.0, 40.0]);
        assert_eq!(v.to_features(), [5.0, 20.0, 40.0]);
    }

    #[test]
    fn effect_size_examples() {
        assert_eq!(effect_size(&[1.0; 4], &[1.0; 4]).unwrap(), 0.0);
        let e = effect_size(&[1.0, 3.0], &[0.0, 2.0]).unwrap();
        assert!((e - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(
            effect_size(&[1.0, 1.0], &[2.0, 2.0]),
            Err(LexiconError::ZeroVariance)
        ));
        assert!(matches!(
            effect_size(&[1.0], &[2.0, 2.0]),
            Err(LexiconError::TooFewValues { .. })
        ));
        // control std of [0, 2] is sqrt(2); population std of all four is sqrt(5)/2
        let glass = effect_size_with(&[1.0, 3.0], &[0.0, 2.0], StdKind::Control).unwrap();
        assert!((glass - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let pop = effect_size_with(&[1.0, 3.0], &[0.0, 2.0], StdKind::Population).unwrap();
        assert!((pop - 1.0 / (1.25f64).sqrt()).abs() < 1e-15);
    }

    fn planted_corpus() -> Corpus {
        // "zorg" only appears in harassing racial tweets
        let mut tweets = Vec::new();
        let mut push = |id: String, text: &str, ty, label| {
            tweets.push(LabeledTweet::new(id, text, ty, label));
        };
        for ty in HarassmentType::ALL {
            for i in 0..4 {
                let text = if ty == HarassmentType::Racial {
                    ["zorg you", "zorg zorg them", "you zorg", "a zorg b c"][i]
                } else {
                    ["you people", "them again", "go away now", "you and me"][i]
                };
                push(format!("{ty}h{i}"), text, ty, Label::Harassing);
                push(format!("{ty}n{i}"), ["nice day", "you rock", "hello you", "fine"][i], ty, Label::NonHarassing);
            }
        }
        Corpus::new(tweets).unwrap()
    }

    #[test]
    fn table_places_signal_in_its_type() {
        let corpus = planted_corpus();
        let l = lex("[zorg]\nzorg\n[second]\nyou\n");
        let table = effect_size_table(&corpus, &l, &TypeColumn::all(), StdKind::Pooled).unwrap();
        assert_eq!(table.features, ["word_count", "zorg", "second"]);
        assert!(table.get("zorg", "racial").unwrap() > 0.0);
        for ty in ["sexual", "appearance", "intellectual", "political"] {
            assert_eq!(table.get("zorg", ty).unwrap(), 0.0);
        }
        assert!(table.get("zorg", "combined").unwrap() > 0.0);
        let pruned = table.prune(0.5);
        assert!(pruned.values.iter().all(|row| row.iter().any(|e| e.abs() > 0.5)));
        assert!(pruned.features.contains(&"zorg".to_string()));

        let harassing_only = crate::corpus::filter_by_type(&corpus, None, Some(Label::Harassing));
        assert!(matches!(
            effect_size_table(&harassing_only, &l, &[TypeColumn::Combined], StdKind::Pooled),
            Err(LexiconError::EmptyGroup { label: Label::NonHarassing, .. })
        ));
    }

    #[test]
    fn frequency_examples() {
        let corpus = Corpus::new(vec![
            LabeledTweet::new("1", "a b a", HarassmentType::Sexual, Label::Harassing),
            LabeledTweet::new("2", "a c @joe http://x.y", HarassmentType::Sexual, Label::Harassing),
        ])
        .unwrap();
        assert_eq!(
            frequent_words(&corpus, 10, None),
            [("a".to_string(), 3), ("b".to_string(), 1), ("c".to_string(), 1)]
        );
        assert_eq!(frequent_words(&corpus, 1, None).len(), 1);
        let stop = parse_stoplist("# common\na\n\n");
        assert_eq!(frequent_words(&corpus, 10, Some(&stop))[0], ("b".to_string(), 1));
    }

    proptest! {
        #[test]
        fn match_agrees_with_linear_scan(
            stems in prop::collection::vec(("[a-d]{1,3}", any::<bool>()), 1..12),
            token in "[a-d]{0,6}",
        ) {
            let categories: Vec<Category> = stems
                .iter()
                .enumerate()
                .map(|(i, (s, prefix))| Category {
                    name: format!("c{i}"),
                    patterns: vec![if *prefix { Pattern::Prefix(s.clone()) } else { Pattern::Literal(s.clone()) }],
                })
                .collect();
            let lexicon = CategoryLexicon::new(categories.clone()).unwrap();
            let expected: BTreeSet<usize> = categories
                .iter()
                .enumerate()
                .filter(|(_, c)| c.patterns.iter().any(|p| match p {
                    Pattern::Literal(w) => *w == token,
                    Pattern::Prefix(s) => token.len() >= s.len() && token[..s.len()] == **s,
                }))
                .map(|(i, _)| i)
                .collect();
            prop_assert_eq!(lexicon.match_token(&token), expected);
        }

        #[test]
        fn percentages_bounded(words in prop::collection::vec("[a-c]{1,3}", 0..20)) {
            let l = lex("[a]\na*\n[b]\nb*\n[c]\nc*\n[any]\na*\nb*\nc*\n");
            let v = liwc_vector(&l, &tokenize_stream("x", &words.join(" ")));
            prop_assert!(v.values.iter().all(|p| (0.0..=100.0).contains(p)));
            prop_assert!(v.values[..3].iter().sum::<f64>() <= 100.0 + 1e-9);
        }
    }
}
