use thiserror::Error;

use crate::pgf::Violation;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid offspring law: {0}")]
    InvalidLaw(Violation),

    #[error("invalid ray relation: {0}")]
    InvalidRelation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A size guard was exceeded; callers should shrink the problem.
    #[error("guard exceeded: {what} is {size}, limit {limit}")]
    Guard { what: &'static str, size: u128, limit: u128 },

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("event is not increasing: {0}")]
    NonMonotone(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for the size-guard variant.
    pub fn is_guard(&self) -> bool {
        matches!(self, Error::Guard { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
