use thiserror::Error;

/// Errors raised by estimators, simulators and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("not enough observations: need {need}, have {have} ({what})")]
    TooShort {
        what: &'static str,
        need: usize,
        have: usize,
    },

    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("malformed input at line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("too many malformed rows: {bad} of {total}")]
    TooManyMalformed { bad: usize, total: usize },

    #[error("replication failures exceed threshold: {failed} of {total}")]
    ReplicationFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
