//! Error type shared by every engine operation.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DcmError {
    #[error("rejected input: {0}")]
    RejectedInput(String),

    #[error("unknown session: {0:?}")]
    UnknownSession(String),

    #[error("fragment {0} is archived")]
    StaleFragment(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown place: {0}")]
    UnknownPlace(String),

    #[error("dialogue client failed for bundle {bundle_id}: {message}")]
    Dialogue { bundle_id: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = DcmError> = std::result::Result<T, E>;
