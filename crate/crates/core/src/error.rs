//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("queue is empty")]
    EmptyQueue,

    #[error("not found: {0}")]
    NotFound(String),

    #[error("no catalog entry targets anomaly type {0}")]
    UnknownAnomalyType(String),

    #[error("decision unit has no candidate adaptations")]
    NoCandidates,

    #[error("no recommendation rule matches ({anomaly}, {scenario:?})")]
    NoRecommendation { anomaly: String, scenario: String },

    #[error("adaptation {0} defines neither an impact nor a threshold effect")]
    UnknownEffect(String),

    #[error("pre-adaptation latency is at or below baseline; nothing to measure")]
    NothingToMeasure,

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
