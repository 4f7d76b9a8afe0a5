use thiserror::Error;

use crate::bounds::BoundViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("context set is empty")]
    EmptyContext,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("retrieval error exceeds the upper bound: {0}")]
    BoundViolation(Box<BoundViolation>),

    #[error("oracle failure (exemplar {exemplar_id:?}, sample {sample_id:?}): {message}")]
    Oracle {
        exemplar_id: Option<u64>,
        sample_id: Option<u64>,
        message: String,
    },

    #[error("score undefined: {0}")]
    Score(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
