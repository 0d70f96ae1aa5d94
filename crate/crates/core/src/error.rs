use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset fully filtered")]
    EmptyDataset,

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("unsupported {what} version: expected {expected}, found {found}")]
    VersionMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("{what} hash mismatch: expected {expected}, found {found}")]
    HashMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("node {node} has zero degree")]
    ZeroDegree { node: usize },

    #[error("eigensolver did not converge after {iterations} restarts; residuals {residuals:?}")]
    NoConvergence { iterations: usize, residuals: Vec<f64> },

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no eligible test users")]
    NoEligibleUsers,
}

impl Error {
    pub(crate) fn format(what: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            what,
            message: message.into(),
        }
    }

    /// True for failures of the numerical routines rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::NonFinite(_) | Error::DegenerateSpectrum(_)
        )
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
