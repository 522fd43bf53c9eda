use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no convergence in {what}: best estimate {estimate:e}, error estimate {error:e}")]
    NoConvergence {
        what: String,
        estimate: f64,
        error: f64,
    },
    #[error("computation cancelled")]
    Cancelled,
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
