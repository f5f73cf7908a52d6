use thiserror::Error;

/// Errors produced by the library. Each variant maps to a CLI exit code and
/// an FFI status code through [`Error::kind`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed to reach its target accuracy.
    #[error("numerical error: {message} (achieved error estimate {achieved:e})")]
    Numerical { message: String, achieved: f64 },

    /// A combinatorial or size guard was exceeded.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Malformed expression text.
    #[error("syntax error at offset {offset}: expected {}", expected.join(" or "))]
    Syntax { offset: usize, expected: Vec<String> },

    /// Invalid parameters (bad shapes, counts, malformed words).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Domain,
    Numerical,
    Resource,
    Syntax,
    InvalidArgument,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain(_) => ErrorKind::Domain,
            Error::Numerical { .. } => ErrorKind::Numerical,
            Error::Resource(_) => ErrorKind::Resource,
            Error::Syntax { .. } => ErrorKind::Syntax,
            Error::InvalidArgument(_) => ErrorKind::InvalidArgument,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, achieved: f64) -> Self {
        Error::Numerical {
            message: msg.into(),
            achieved,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
