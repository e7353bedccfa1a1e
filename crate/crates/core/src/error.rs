//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by moment, cumulant, fitting and membership routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Operands have incompatible variable counts or truncation orders.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Input is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural precondition on the input was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Malformed CSV or JSON input.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
