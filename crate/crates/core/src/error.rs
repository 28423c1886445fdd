use thiserror::Error;

/// Errors raised by the pseudo-box pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Every grid weight around an annotation was zero.
    #[error("empty neighborhood: no probability mass around the annotation")]
    EmptyNeighborhood,

    #[error("could not place instance {instance} after {attempts} attempts")]
    PlacementExhausted { instance: usize, attempts: usize },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("invalid estimate: {0}")]
    InvalidEstimate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
