//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps these onto the exit-code contract: verification failures
/// exit 1, configuration and precondition problems exit 2.
#[derive(Debug, Error)]
pub enum FinslerError {
    /// An operation received the zero vector where a direction is required.
    #[error("zero vector: {0}")]
    ZeroVector(String),

    /// The fundamental tensor lost positive definiteness.
    #[error("strong convexity violated: {0}")]
    StrongConvexity(String),

    /// Iterative solve failed to converge.
    #[error("numerical failure: {what} (iterations: {iterations}, residual: {residual:.3e})")]
    Numerical {
        what: String,
        iterations: usize,
        residual: f64,
    },

    /// Input outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Scenario or parameter validation failure.
    #[error("configuration error: {0}")]
    Config(String),

    /// Time stepping became unstable (positivity or convexity loss).
    #[error("stability failure at t={t}: {what}")]
    Stability { t: f64, what: String },

    /// Metric family not supported by the requested operation.
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    /// A verification precondition (condition check) failed.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FinslerError>;
