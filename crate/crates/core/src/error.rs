use thiserror::Error;

/// Errors raised by the estimators, oracles and fitting routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid parameter `{name}`: {detail}")]
    InvalidParameter { name: &'static str, detail: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("deviance requires strictly positive means, entry {index} is {value}")]
    NonPositiveMean { index: usize, value: f64 },

    #[error("gradient of the deviance generator is undefined at zero (entry {index})")]
    UndefinedGradient { index: usize },

    #[error("algorithm `{algorithm}` returned an invalid fit at entry {index}: {value}")]
    InvalidFit {
        algorithm: String,
        index: usize,
        value: f64,
    },

    #[error("algorithm `{algorithm}` returned {got} fitted values for {expected} observations")]
    FitLength {
        algorithm: String,
        expected: usize,
        got: usize,
    },

    #[error("enumeration needs {required} points, budget is {budget}")]
    BudgetExceeded { required: f64, budget: f64 },

    #[error("linear system is singular or not positive definite")]
    Singular,
}

impl Error {
    pub(crate) fn param(name: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
