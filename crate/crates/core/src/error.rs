use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the model, head, training and I/O layers.
#[derive(Debug, Error)]
pub enum AgrmError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in sample {sample}: {what}")]
    Numeric { sample: usize, what: String },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unsupported checkpoint format version {0}")]
    Version(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = AgrmError> = std::result::Result<T, E>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(AgrmError::Argument(msg.into()))
}
