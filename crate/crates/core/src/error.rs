use thiserror::Error;

/// Errors raised by the analytic and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("confidence parameter delta = {0} is outside (0, 1]")]
    DeltaOutOfRange(f64),

    #[error("sample size n = {0} must be at least 1")]
    SampleSizeTooSmall(u64),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid guarantee: {0}")]
    InvalidGuarantee(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid learning problem: {0}")]
    InvalidProblem(String),

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("phi transform `{0}` is not concave")]
    NotConcave(String),

    #[error("phi({eps}) = 0, the tail bound is undefined")]
    PhiVanishes { eps: f64 },

    #[error("enumeration needs {compositions} count vectors, budget is {budget}")]
    EnumerationBudget { compositions: u128, budget: u128 },
}

pub type Result<T> = std::result::Result<T, BoundError>;

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(BoundError::DeltaOutOfRange(delta))
    }
}

pub(crate) fn check_n(n: u64) -> Result<()> {
    if n >= 1 {
        Ok(())
    } else {
        Err(BoundError::SampleSizeTooSmall(n))
    }
}
