use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty cohort")]
    EmptyCohort,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Neither the event count nor the reference-variance term is positive.
    #[error("degenerate data: no events observed in either cohort")]
    DegenerateData,

    #[error("zero variance")]
    ZeroVariance,

    #[error("degenerate: no informative event times")]
    NoInformativeEvents,

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("quadrature did not converge: estimated error {achieved:.3e} exceeds tolerance {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("design infeasible: {0}")]
    Infeasible(String),

    #[error("allocation produces empty arm")]
    EmptyArm,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed or out-of-range input, as opposed
    /// to numerically degenerate data or solver failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyCohort | Error::InvalidInput(_) | Error::InvalidParameter { .. } | Error::EmptyArm
        )
    }
}
