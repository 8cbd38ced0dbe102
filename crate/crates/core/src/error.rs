use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThetaError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{name} = {value} lies outside [0, {upper}]")]
    Domain {
        name: &'static str,
        value: f64,
        upper: f64,
    },

    #[error("digit sequence is empty")]
    EmptyDigits,

    #[error("digit {digit} at position {position} is below m = {m}")]
    DigitBelowM { digit: u64, position: usize, m: u64 },

    #[error("orbit reaches an excluded zero coordinate at step {step}")]
    ExcludedState { step: i64 },

    #[error("digit of {x:e} does not fit in 53 bits")]
    DigitOverflow { x: f64 },

    #[error("resource budget exceeded: {what} = {requested} (limit {limit})")]
    ResourceBudget {
        what: &'static str,
        requested: u64,
        limit: u64,
    },
}

pub type Result<T> = std::result::Result<T, ThetaError>;
