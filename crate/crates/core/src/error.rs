use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the training engine.
#[derive(Debug, Error)]
pub enum SnnError {
    /// A caller broke an operation's contract (shapes, ranges, ordering).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    Config(String),

    /// Malformed dataset, frame container or checkpoint bytes.
    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A prune-rate update saw an empty successor layer.
    #[error("layer {layer} has no alive units downstream of pruned layer")]
    DeadSuccessor { layer: usize },

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SnnError>;

pub(crate) fn contract(msg: impl Into<String>) -> SnnError {
    SnnError::Contract(msg.into())
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> SnnError {
    let path = path.into();
    move |source| SnnError::Io { path, source }
}
