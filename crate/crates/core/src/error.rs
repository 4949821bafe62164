use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// A profile, builder or operation parameter lies outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// An input field or argument violates an operation precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two fields that must live on the same grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The (g, psi) combination is not admissible for the requested inequality.
    #[error("inadmissible pair: {0}")]
    Inadmissible(String),

    /// A pair failed a numeric assumption check.
    #[error("pair validation failed: {0}")]
    PairValidation(String),

    /// The time integrator gave up.
    #[error("solver abort at t = {time} (step {step}): {reason}")]
    SolverAbort { time: f64, step: usize, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::ParameterDomain(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
