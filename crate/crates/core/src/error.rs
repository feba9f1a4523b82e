use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("exponent {0} out of range: {1}")]
    Exponent(f64, &'static str),

    #[error("threshold must be positive, got {0}")]
    NonPositiveThreshold(f64),

    #[error("window of {0} samples exceeds the limit of {1}")]
    WindowTooLarge(u64, u64),

    #[error("integer overflow evaluating {0}")]
    Overflow(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero signal has no normalized ratio")]
    ZeroSignal,

    #[error("zero kernel")]
    ZeroKernel,

    #[error("regression needs {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("nonpositive ratio {0} at N = {1}")]
    NonPositiveRatio(f64, f64),

    #[error("degenerate N grid: all N equal")]
    DegenerateGrid,

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
