use thiserror::Error;

/// Errors raised by the numerical operations of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The input does not carry enough samples (or horizon) for the request.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// Two trajectories cannot be spliced because the endpoint states differ.
    #[error("concatenation error: {0}")]
    Concatenation(String),
    /// A time does not fall on the sampling grid.
    #[error("alignment error: {0}")]
    Alignment(String),
    /// The caller violated an operation's precondition.
    #[error("contract error: {0}")]
    Contract(String),
    /// A simulated path left the admissible state space.
    #[error("feasibility error: state left the admissible set at t = {time}")]
    Feasibility { time: f64 },
    /// State-space expansion exceeded the configured node cap.
    #[error("capacity error: node cap {cap} exceeded with frontier of {frontier} states")]
    Capacity { cap: usize, frontier: usize },
    /// Malformed input file.
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
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

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
