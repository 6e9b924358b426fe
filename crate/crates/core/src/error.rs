use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A point or coordinate lies outside the unit cube.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The instance is too large for the requested method.
    #[error("resource limit: {0}")]
    Resource(String),

    #[error("no convergence after {iterations} iterations (marginal violation {violation:e})")]
    Convergence { iterations: usize, violation: f64 },

    /// A certified inequality failed; this indicates a solver bug, not bad input.
    #[error("certificate violation: {0}")]
    Certificate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
