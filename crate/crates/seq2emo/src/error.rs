//! Crate-wide error type.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// Tensor shapes do not line up for an operation.
    Dimension(String),
    /// An argument is outside its legal range.
    Domain(String),
    /// An API contract was violated (e.g. backward on a non-scalar).
    Contract(String),
    /// A file could not be parsed; carries the 1-based line number.
    Parse { line: usize, msg: String },
    /// Input data is structurally valid but semantically wrong.
    Data(String),
    /// Bad configuration value or combination.
    Config(String),
    /// Non-finite value or failed numeric check.
    Numeric(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(m) => write!(f, "dimension error: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Contract(m) => write!(f, "contract error: {m}"),
            Error::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            Error::Data(m) => write!(f, "data error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Numeric(m) => write!(f, "numeric error: {m}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
