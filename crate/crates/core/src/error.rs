use thiserror::Error;

/// Errors raised anywhere in the measurement stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdlError {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The observed example is inconsistent with every surviving hypothesis.
    #[error("example {index} contradicts every surviving hypothesis")]
    Contradiction { index: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("codelength {0} nats cannot be realized above the probability floor")]
    UnreachableCodelength(f64),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for EdlError {
    fn from(err: std::io::Error) -> Self {
        EdlError::Io(err.to_string())
    }
}

pub type Result<T, E = EdlError> = std::result::Result<T, E>;

/// Attaches the dataset position to a contradiction raised by a learner.
pub(crate) fn at_index(err: EdlError, index: usize) -> EdlError {
    match err {
        EdlError::Contradiction { .. } => EdlError::Contradiction { index },
        other => other,
    }
}
