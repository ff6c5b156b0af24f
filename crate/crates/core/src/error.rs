use thiserror::Error;

/// Errors produced by the library. The CLI maps every variant except
/// [`Error::Numeric`] to an input error.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input text (ragged rows, unparsable cells).
    #[error("format error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format {
        line: Option<usize>,
        message: String,
    },
    /// Value outside the admissible domain (negative entry, empty matrix).
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent or unsupported arguments.
    #[error("argument error: {0}")]
    Argument(String),
    /// A configured work cap would be exceeded.
    #[error("resource error: {0}")]
    Resource(String),
    /// Iterative numerics failed to converge.
    #[error("numeric error in sample {sample}: {message}")]
    Numeric { sample: u64, message: String },
}

impl Error {
    pub(crate) fn format(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    /// Stable identifier used in JSON error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Format { .. } => "format",
            Error::Domain(_) => "domain",
            Error::Argument(_) => "argument",
            Error::Resource(_) => "resource",
            Error::Numeric { .. } => "numeric",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
