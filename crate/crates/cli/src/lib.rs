//! Command implementations behind the `maxrisk` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod csv;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] maxrisk::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 for invalid configurations, 3 for numerical
    /// non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use maxrisk::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(E::Domain(_) | E::Unsupported(_)) => 2,
            CliError::Numeric(E::NoConvergence { .. } | E::Factorization(_)) => 3,
            CliError::Numeric(_) | CliError::Io(_) => 1,
        }
    }
}
