use thiserror::Error;

use crate::mathkit::lp::LpError;

/// Errors raised across the simulation and analysis stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("missing count-table entry: {0}")]
    MissingEntry(String),

    #[error("counts inconsistent with any photon-number model ({0})")]
    InconsistentCounts(String),

    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),

    #[error("photon-number truncation tail {tail:.3e} exceeds {limit:.0e}; increase n_cut or lower the intensity")]
    TruncationTail { tail: f64, limit: f64 },

    #[error("insecure channel: {0}")]
    Insecure(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("unknown party {0}")]
    UnknownParty(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("ingestion failed at row {row}: {reason}")]
    Ingest { row: usize, reason: String },

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
