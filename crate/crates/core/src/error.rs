use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function, e.g. a probability
    /// of exactly 0 or 1 handed to an inverse tail function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// An inside-mode formula was applied to an outside observation or vice versa.
    #[error("wrong test mode: {0}")]
    Mode(String),
    /// A quantity underflowed or overflowed beyond what can be reported.
    #[error("numeric overflow: {0}")]
    Overflow(String),
    /// Too few informative observations to estimate the requested quantity.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// Maximum-likelihood fitting did not converge.
    #[error("fit of {model} failed: {detail}")]
    Fit { model: String, detail: String },
    /// Malformed text input.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    /// A bootstrap scale cannot be realised.
    #[error("invalid scale: {0}")]
    Scale(String),
    /// The projection onto a region boundary is not unique.
    #[error("ambiguous projection: {0}")]
    Ambiguous(String),
    /// Invalid user configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
