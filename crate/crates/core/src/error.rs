use thiserror::Error;

/// Errors raised by model construction, exact solvers and algorithm setup.
///
/// Divergence of a learning run is not an error; it is recorded on the
/// [`RunRecord`](crate::harness::RunRecord).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("index out of range: {what} = {index} (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("behavior policy has no coverage for action {action} in state {state} (mu = 0)")]
    CoverageViolation { state: usize, action: usize },

    #[error("chain under policy `{policy}` did not converge to a stationary distribution after {iterations} iterations (reducible or periodic)")]
    ReducibleChain { policy: String, iterations: usize },

    #[error("discounting is not contractive: {0}")]
    NonContractive(String),

    #[error("degenerate clipped policy: normalizer nu(s) is zero in state {state}")]
    DegeneratePolicy { state: usize },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("invalid configuration: {0}")]
    InvalidSpec(String),

    #[error("eigen-decomposition failed: {0}")]
    EigenFailure(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
