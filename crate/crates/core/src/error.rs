use thiserror::Error;

/// Errors produced by the library surface.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector/matrix dimensions do not line up.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// An invalid parameter combination (grid resolution, injectivity margin, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A grid or allocation would exceed the configured budget.
    #[error("resource error: {0}")]
    Resource(String),

    /// Not enough samples/trials for the requested statistic.
    #[error("statistics error: {0}")]
    Stats(String),

    /// A persisted run does not match the expected schema or is corrupt.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
