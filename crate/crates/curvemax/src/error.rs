//! Error taxonomy shared by every module.
//!
//! The variants mirror how operations fail: inputs that violate a type's
//! invariants are rejected up front, configuration errors describe resolutions
//! or windows that cannot support the requested computation, precondition
//! errors flag calls outside an operation's domain of validity, and usage
//! errors cover malformed orchestration (schedules, grids, budgets).

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a structural invariant (NaN weight, duplicate node, ...).
    #[error("rejected input: {0}")]
    RejectedInput(String),

    /// A resolution/window combination cannot support the requested evaluation.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The call sits outside the operation's domain of validity.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Malformed orchestration input (empty schedule, non-increasing grid, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A declared runtime budget was exhausted before the run finished.
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
