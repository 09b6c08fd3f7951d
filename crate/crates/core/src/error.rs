use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Param(String),

    /// The inputs are valid individually but the operation is undefined for them.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("resource error: {0}")]
    Resource(String),

    /// Input data is malformed (non-finite entries, empty samples, too few points).
    #[error("data error: {0}")]
    Data(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("state error: {0}")]
    State(String),

    #[error("solver failed at {} abscissae: {failed:?}", failed.len())]
    PartialResult { failed: Vec<f64> },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Param(msg.into()))
}
