use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A series or improper integral was shown not to converge.
    #[error("divergent: {0}")]
    Divergent(String),

    /// Quadrature ran out of refinement budget before a verdict was reached.
    #[error("undecided: {0}")]
    Undecided(String),

    /// A count factor that is infinite (alpha never drops below the level).
    #[error("unbounded: {0}")]
    Unbounded(String),

    /// Covariance matrix with a materially negative eigenvalue.
    #[error("kernel is indefinite: eigenvalue {eigenvalue:e} below threshold {threshold:e}")]
    Indefinite { eigenvalue: f64, threshold: f64 },

    /// A precondition of an experiment does not hold (the theory does not apply).
    #[error("precondition refused: {0}")]
    Refused(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
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
