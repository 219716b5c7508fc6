use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix shape mismatch: {0}")]
    Shape(String),

    #[error("cost overflow at index {index}")]
    CostOverflow { index: usize },

    #[error("noise index underflow: slot {n} with age {age} reaches before the trace start")]
    IndexUnderflow { n: usize, age: usize },

    #[error("noise trace too short: need slot {needed}, trace has {len}")]
    TraceTooShort { needed: usize, len: usize },

    #[error("non-finite expectation term at y = {y}")]
    NonFinite { y: u64 },

    #[error("cost table too small: max_delta = {have}, required {required}")]
    CostTableTooSmall { have: usize, required: usize },

    #[error("upper bound too small: o({upper}) = {residual} does not bracket the root")]
    UpperBoundTooSmall { upper: f64, residual: f64 },

    #[error("degenerate renewal cycle: expected cycle length is {0}")]
    DegenerateCycle(f64),

    #[error("model has no input matrix B")]
    MissingInput,

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
