//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by analysis, design, and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A mathematical precondition was violated (nonpositive spectrum,
    /// distortion out of range, invalid composition, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver failed to converge within its budget.
    #[error("solver error: {0}")]
    Solver(String),

    /// API contract violation (uninitialized codec state, desynchronized
    /// dither streams, mismatched dimensions, ...).
    #[error("contract error: {0}")]
    Contract(String),

    /// Malformed external input (CSV spectrum file, JSON filter set).
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
