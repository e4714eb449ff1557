use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge: {0}")]
    Accuracy(String),
    #[error("ODE step size underflow at lambda = {lambda}")]
    StepUnderflow { lambda: f64 },
    #[error("singular interaction: particles {i} and {j} coincide")]
    Singularity { i: usize, j: usize },
    #[error("eigensolver failed to converge after {sweeps} sweeps")]
    Convergence { sweeps: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty sample set")]
    EmptySample,
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
