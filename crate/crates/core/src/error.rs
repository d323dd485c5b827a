use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Quantum numbers or angles outside their allowed range.
    #[error("domain error: {0}")]
    Domain(String),
    /// A value was well-formed but violated a physical or numerical invariant.
    #[error("validation failed: {0}")]
    Validation(String),
    /// An input file or argument could not be parsed.
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! domain {
    ($($arg:tt)*) => { $crate::error::Error::Domain(format!($($arg)*)) };
}

macro_rules! invalid {
    ($($arg:tt)*) => { $crate::error::Error::Validation(format!($($arg)*)) };
}

pub(crate) use domain;
pub(crate) use invalid;
