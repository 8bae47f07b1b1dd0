use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A malformed input record; `line` is 1-based.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An argument violates the operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Not enough samples (or usable points) for the requested computation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A numerical routine failed or produced an undefined result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn insufficient<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InsufficientData(msg.into()))
}
