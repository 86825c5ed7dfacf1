use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot score an empty hypothesis")]
    EmptyHypothesis,

    #[error("no tokens left to average after excluding EOS")]
    EmptyInclusion,

    #[error("non-finite score: {0}")]
    NonFinite(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),

    #[error("search space of {space} sequences exceeds the budget of {budget}")]
    BudgetExceeded { space: f64, budget: u64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: error span marked on the source side")]
    SourceSpan { line: usize },

    #[error("token offset ({start}, {end}) out of bounds for text of {len} chars")]
    OffsetOutOfBounds { start: usize, end: usize, len: usize },

    #[error("training data has no GOOD or BAD labels (all MASK)")]
    AllMasked,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("statistic undefined: {0}")]
    Undefined(&'static str),

    #[error("model file: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
