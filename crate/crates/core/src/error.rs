use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("model validation failed: {0}")]
    Validation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("extended-real arithmetic is undefined for +inf + -inf")]
    UndefinedInfinity,

    #[error("no root of the inter-arrival cumulant for target {target}")]
    NoRoot { target: f64 },

    #[error("optimizer inconclusive after {iterations} iterations (best value {best}, gradient norm {gradient_norm})")]
    Inconclusive {
        best: f64,
        gradient_norm: f64,
        iterations: usize,
    },

    #[error("event contains the limit point; its rate is zero and plain Monte Carlo suffices")]
    ZeroRate,

    #[error("exact enumeration needs {terms} terms (limit {limit}); use Monte Carlo instead")]
    EnumerationTooLarge { terms: f64, limit: f64 },

    #[error("likelihood-ratio weight overflow: log-weight {0} exceeds 700")]
    WeightOverflow(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Name of the subsystem that typically raises this error, used when the
    /// experiment runner reports failures.
    pub fn module(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } | Error::UndefinedInfinity => "dual",
            Error::NoRoot { .. } => "counting",
            Error::Inconclusive { .. } => "variational",
            Error::ZeroRate | Error::EnumerationTooLarge { .. } | Error::WeightOverflow(_) => {
                "montecarlo"
            }
            Error::Config(_) | Error::Io(_) => "cli",
            Error::InvalidValue(_)
            | Error::Validation(_)
            | Error::Unsupported(_)
            | Error::Precondition(_) => "model",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
