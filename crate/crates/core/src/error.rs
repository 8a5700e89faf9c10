use thiserror::Error;

use crate::catalog::ContentId;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("content id {id} outside catalog 1..={num_contents}")]
    UnknownContent { id: ContentId, num_contents: u32 },

    #[error("invalid eviction decision: {0}")]
    InvalidDecision(String),

    #[error("invalid action {action} for oracle {oracle} (allowed 0..={max})")]
    InvalidAction {
        oracle: usize,
        action: usize,
        max: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
