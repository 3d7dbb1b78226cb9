use std::path::Path;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter set violates its invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A domain precondition was violated (wrong branch, negative duration, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A data file could not be parsed; names the file and the first bad record.
    #[error("{path}: {detail}")]
    Parse { path: String, detail: String },

    /// A least-squares system was singular or under-determined.
    #[error("fit failed: {0}")]
    FitFailed(String),

    /// The optimization or simulation has no feasible continuation.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Value tables were produced from a different model/course/config.
    #[error("fingerprint mismatch: {0}")]
    FingerprintMismatch(String),

    /// A value-table file is structurally invalid (bad magic, truncated, ...).
    #[error("malformed table file: {0}")]
    TableFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: &Path, detail: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
