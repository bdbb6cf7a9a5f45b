//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by configuration, construction and solver routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its documented domain.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Matrix or vector dimensions do not match the operation's contract.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numerical routine left its domain (singular system, non-finite value).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A constraint system has no feasible point.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// An iterative routine hit its iteration cap without meeting tolerances.
    #[error("iteration limit reached: {0}")]
    IterationLimit(String),

    /// Input/output error from the harness layer.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<V> = std::result::Result<V, Error>;
