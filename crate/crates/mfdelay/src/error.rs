use thiserror::Error;

/// Errors raised by the solvers and their input validation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dispatch error: {0}")]
    Dispatch(String),
    #[error("precondition error: {0}")]
    Precondition(String),
    #[error("missing partial derivative `{0}`")]
    MissingPartial(&'static str),
    #[error("divergence at step {step} (t = {time}): non-finite state")]
    Divergence { step: usize, time: f64 },
    #[error("no convergence after {} iterations; norms {norms:?}", norms.len())]
    NonConvergence { norms: Vec<f64> },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
