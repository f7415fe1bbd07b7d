//! Shared error type for all engines.

use thiserror::Error;

/// Errors produced by spec validation and the numerical engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative rate: {0}")]
    NegativeRate(String),
    #[error("rate out of range: {0}")]
    RateOutOfRange(String),
    #[error("missing parameter: {0}")]
    MissingParameter(String),
    #[error("extraneous parameter: {0}")]
    ExtraneousParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("truncation budget unreachable: {0}")]
    Truncation(String),
    #[error("integrator step underflow: {0}")]
    Stiffness(String),
    #[error("precision target unreachable: {0}")]
    Precision(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by invalid user input (spec parameters,
    /// malformed files) rather than by a failing numerical method.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::NegativeRate(_)
                | Error::RateOutOfRange(_)
                | Error::MissingParameter(_)
                | Error::ExtraneousParameter(_)
                | Error::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
