use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested accuracy could not be reached; carries the best bound achieved.
    #[error("{what}: target {target:e} unreachable, best achievable bound {achieved:e}")]
    Unreachable {
        what: String,
        target: f64,
        achieved: f64,
    },

    /// An iterative evaluation did not converge.
    #[error("{what} did not converge (achieved {achieved:e})")]
    NonConvergence { what: String, achieved: f64 },

    /// Exact integer arithmetic overflowed its 128-bit accumulator.
    #[error("integer overflow in {0}")]
    Overflow(String),

    /// An enumeration would exceed the configured work budget.
    #[error("work budget exceeded: {0}")]
    Budget(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable code used in CLI error payloads.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Unreachable { .. } => "unreachable_tail",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Overflow(_) => "overflow",
            Error::Budget(_) => "budget",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }

    /// Whether the failure is numeric (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Unreachable { .. } | Error::NonConvergence { .. } | Error::Overflow(_)
        )
    }
}
