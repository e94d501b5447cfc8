use thiserror::Error;

/// Errors raised by the sign-test machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A copula rectangle produced a mass below the negative tolerance. This is
    /// how a violated constant-conditional-copula condition surfaces.
    #[error("copula rectangle has negative mass {mass:e}")]
    NonIncreasingCopula { mass: f64 },

    /// A conditional probability used as a divisor vanished.
    #[error("degenerate conditional probability (value {value:e}) at position {index}")]
    DegenerateConditional { index: usize, value: f64 },

    /// The one-dimensional optimizer hit its iteration cap.
    #[error("optimizer did not converge after {iterations} iterations (best parameter {best_param}, value {best_value})")]
    NoConvergence {
        iterations: usize,
        best_param: f64,
        best_value: f64,
    },

    /// X'X could not be inverted.
    #[error("singular design matrix")]
    SingularDesign,

    /// A likelihood or score could not be evaluated.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// Malformed configuration or input.
    #[error("configuration error: {0}")]
    Config(String),

    /// More than 1% of the replications of a study cell failed.
    #[error("{failed} of {total} replications failed ({detail})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        detail: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
