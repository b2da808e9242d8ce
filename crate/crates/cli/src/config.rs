//! TOML run configuration. Every value is optional; command-line flags win
//! over the file, and the file wins over built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: PathsSection,
    /// Block notation (`W(S)`, `F(C)`, ...) to embedding table path.
    #[serde(default)]
    pub embeddings: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub features: FeaturesSection,
    #[serde(default)]
    pub learner: LearnerSection,
    #[serde(default)]
    pub task: TaskSection,
    #[serde(default)]
    pub cv: CvSection,
    #[serde(default)]
    pub embed: EmbedSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub report: ReportSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub stoplist: Option<PathBuf>,
    pub sentences: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesSection {
    pub spec: Option<String>,
    pub composition: Option<String>,
    pub standardize: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSection {
    pub kind: Option<String>,
    pub learning_rate: Option<f64>,
    pub n_trees: Option<usize>,
    pub subsample: Option<f64>,
    pub max_depth: Option<usize>,
    pub min_samples_split: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub alpha: Option<f64>,
    pub k: Option<usize>,
    pub metric: Option<String>,
    pub lambda: Option<f64>,
    pub epochs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub mode: Option<String>,
    pub nonharassing_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSection {
    pub k: Option<usize>,
    pub repeats: Option<usize>,
    pub pooled: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedSection {
    pub name: Option<String>,
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub min_count: Option<u64>,
    pub mode: Option<String>,
    pub level: Option<String>,
    pub ngram_min: Option<usize>,
    pub ngram_max: Option<usize>,
    pub buckets: Option<u32>,
    pub negatives: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub threshold: Option<f64>,
    pub top: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    pub format: Option<String>,
}

impl FileConfig {
    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        fix(&mut cfg.paths.corpus);
        fix(&mut cfg.paths.lexicon);
        fix(&mut cfg.paths.stoplist);
        fix(&mut cfg.paths.sentences);
        fix(&mut cfg.paths.model);
        fix(&mut cfg.paths.output);
        for p in cfg.embeddings.values_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// First present value: command line, then config file.
pub fn pick<T>(cli: Option<T>, file: Option<T>) -> Option<T> {
    cli.or(file)
}

pub fn require<T>(value: Option<T>, what: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::config(format!("missing required setting `{what}`")))
}

/// Checks that an input path exists before any work starts.
pub fn existing(path: PathBuf, what: &str) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::config(format!("{what} not found: {}", path.display())))
    }
}
