//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by graph construction, inference, search and queries.
#[derive(Debug, Error)]
pub enum RdcegError {
    /// The requested transformation would leave the graph in an invalid state.
    #[error("structural inconsistency: {0}")]
    Structure(String),

    /// A staging or position partition is inconsistent with the tree it colors.
    #[error("staging inconsistency: {0}")]
    Staging(String),

    /// A parameter is outside its domain (non-positive scale, negative time, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A populated stage or cluster has no prior attached.
    #[error("missing prior: {0}")]
    MissingPrior(String),

    /// Two models cannot be compared (different underlying trees).
    #[error("models are not comparable: {0}")]
    Incomparable(String),

    /// A dataset row could not be resolved against the model.
    #[error("data error at record {record}: {message}")]
    Data { record: usize, message: String },

    /// An SMP query referenced an unknown state.
    #[error("unknown state: {0}")]
    UnknownState(String),

    /// Condensation request that is not defined (e.g. across cyclic edges).
    #[error("condensation rejected: {0}")]
    Condense(String),

    /// Configuration file invalid or incomplete.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RdcegError>;
