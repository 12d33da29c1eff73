//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("modulus check failed at eps={eps}: {reason}")]
    InvalidModulus { eps: f64, reason: String },

    #[error("series does not diverge fast enough: no index reaches partial sum {target}")]
    NotDivergent { target: u64 },

    #[error("step schedule exhausted at step {step}")]
    ScheduleExhausted { step: usize },

    #[error("certified index {required} exceeds the trace horizon cap {cap}")]
    HorizonExceeded { required: u64, cap: u64 },

    #[error("empirical estimation failed at eps={eps}: {reason}")]
    Estimation { eps: f64, reason: String },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("infeasible problem description: {0}")]
    Infeasible(String),

    #[error("missing certificate component: {0}")]
    MissingCertificate(&'static str),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
