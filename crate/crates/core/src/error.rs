use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DgiError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DgiError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("index {index} out of range (node count {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DgiError {
    pub(crate) fn dims(op: &'static str, detail: impl Into<String>) -> Self {
        DgiError::DimensionMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DgiError::InvalidArgument(msg.into())
    }
}
