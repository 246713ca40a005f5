use thiserror::Error;

/// Errors raised by the detection engine and its supporting modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value or index lies outside the admissible range.
    #[error("out of range: {0}")]
    Range(String),
    /// A parameter lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A series or segment is too short for the requested operation.
    #[error("length error: {0}")]
    Length(String),
    /// Inconsistent or incompatible configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Input violates a structural precondition (ordering, uniqueness, ...).
    #[error("validation error: {0}")]
    Validation(String),
    /// The operation is not available for this input.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Not enough data to estimate a quantity.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// Malformed input file.
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag for the error category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Range(_) => "range",
            Error::Domain(_) => "domain",
            Error::Length(_) => "length",
            Error::Config(_) => "config",
            Error::Validation(_) => "validation",
            Error::Unsupported(_) => "unsupported",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Format(_) => "format",
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
