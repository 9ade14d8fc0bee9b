use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {x} lies outside the domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("oracle budget of {budget} queries exhausted")]
    Budget { budget: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("slope {s} is outside the attained slope range [{lo}, {hi}]")]
    Range { s: f64, lo: f64, hi: f64 },

    #[error("budget T={t} is too small for r={r}: floor(r ln T) = 0 rounds")]
    Schedule { t: u64, r: f64 },

    #[error("insufficient data: {0}")]
    Data(String),
}
