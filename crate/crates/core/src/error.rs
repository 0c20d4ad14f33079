use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input data (lengths, non-finite values, weights).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two random variables that must share a scenario space do not.
    #[error("random variables live on different scenario spaces")]
    SpaceMismatch,

    /// An argument left the domain of the risk profile or utility function.
    #[error("domain violation at scenario {scenario}: argument {value} is outside {domain}")]
    Domain {
        scenario: usize,
        value: f64,
        domain: String,
    },

    /// A risk profile failed its grid validation.
    #[error("risk profile rejected: {reason} (first offending points: {points:?})")]
    ProfileValidation { reason: String, points: Vec<f64> },

    /// A documented precondition of an operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// An iterative solver stopped before meeting its tolerance.
    #[error("solver did not converge after {iterations} iterations (residuals {residuals:?})")]
    NonConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// `true` for failures of iterative solvers, as opposed to bad input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
