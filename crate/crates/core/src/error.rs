use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{transform} does not allow zero components (row {row})")]
    ZeroNotAllowed { transform: &'static str, row: usize },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("all kernel weights underflowed to zero for query {query}")]
    DegenerateWeights { query: usize },

    #[error("Newton-Raphson did not converge after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        /// Last coefficient iterate, row-major (p+1)x(D-1).
        last: Vec<f64>,
    },

    #[error("tuning failed: {0}")]
    TuningFailed(String),

    #[error("csv error at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Short machine-readable tag, used by the CLI in structured error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Degenerate(_) => "degenerate",
            Error::ZeroNotAllowed { .. } => "zero_not_allowed",
            Error::OutOfRange(_) => "out_of_range",
            Error::DegenerateWeights { .. } => "degenerate_weights",
            Error::NonConvergence { .. } => "non_convergence",
            Error::TuningFailed(_) => "tuning_failed",
            Error::Csv { .. } => "csv",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
