//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model evaluation, expansion construction, pricing and the oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter failed its validation invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested model/regime/measure combination has no supported expansion.
    #[error("unsupported combination: {0}")]
    Unsupported(String),

    /// Moment explosion: the lmgf is infinite at the requested real argument.
    #[error("moment explosion: {context} at u = {arg}")]
    Explosion { context: String, arg: f64 },

    /// Argument outside an operation's domain of validity.
    #[error("domain violation: {0}")]
    Domain(String),

    /// An iterative numerical procedure failed to converge or lost accuracy.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
