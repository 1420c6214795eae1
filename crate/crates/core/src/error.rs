use thiserror::Error;

/// Errors surfaced by every module of the crate.
///
/// The variants map onto the CLI exit codes: validation problems exit with 1,
/// numeric failures with 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature failed to converge ({context}): residual estimate {residual:e}")]
    Quadrature { context: String, residual: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("enumeration cap exceeded: {states} label states > cap {cap}")]
    EnumerationCap { states: u128, cap: u128 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Machine-readable tag used in JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "validation",
            Error::Unsupported(_) => "unsupported",
            Error::Quadrature { .. } => "quadrature",
            Error::Numeric(_) => "numeric",
            Error::EnumerationCap { .. } => "enumeration_cap",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Quadrature { .. } | Error::Numeric(_) => 2,
            _ => 1,
        }
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

pub type Result<T, E = Error> = std::result::Result<T, E>;
