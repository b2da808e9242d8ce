use std::fmt;

use hartype::classify::ClassifyError;
use hartype::corpus::CorpusError;
use hartype::embeddings::EmbeddingError;
use hartype::evaluate::EvaluateError;
use hartype::lexicon::LexiconError;
use hartype::vectorize::VectorizeError;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: ErrorKind,
            exit_code: i32,
            message: &'a str,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Wrapper {
            error: Body {
                kind: self.kind,
                exit_code: self.kind.exit_code(),
                message: &self.message,
            },
        })
        .expect("error serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn with_kind(kind: ErrorKind, e: impl fmt::Display) -> CliError {
    CliError {
        kind,
        message: e.to_string(),
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        with_kind(ErrorKind::Data, e)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        let kind = match e {
            CorpusError::InvalidFolds(_) => ErrorKind::Config,
            _ => ErrorKind::Data,
        };
        with_kind(kind, e)
    }
}

impl From<LexiconError> for CliError {
    fn from(e: LexiconError) -> Self {
        let kind = match e {
            LexiconError::ZeroVariance => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        };
        with_kind(kind, e)
    }
}

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        let kind = match e {
            EmbeddingError::InvalidConfig(_) => ErrorKind::Config,
            _ => ErrorKind::Data,
        };
        with_kind(kind, e)
    }
}

impl From<VectorizeError> for CliError {
    fn from(e: VectorizeError) -> Self {
        let kind = match e {
            VectorizeError::UnknownBlock(_)
            | VectorizeError::DuplicateBlock(_)
            | VectorizeError::EmptySpec
            | VectorizeError::MissingResource(_)
            | VectorizeError::WrongResource { .. } => ErrorKind::Config,
            _ => ErrorKind::Data,
        };
        with_kind(kind, e)
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        let kind = match e {
            ClassifyError::InvalidConfig(_) => ErrorKind::Config,
            ClassifyError::NonFinite => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        };
        with_kind(kind, e)
    }
}

impl From<EvaluateError> for CliError {
    fn from(e: EvaluateError) -> Self {
        match e {
            EvaluateError::Classify(inner) => inner.into(),
            EvaluateError::Vectorize(inner) => inner.into(),
            EvaluateError::Corpus(inner) => inner.into(),
            other => with_kind(ErrorKind::Data, other),
        }
    }
}
