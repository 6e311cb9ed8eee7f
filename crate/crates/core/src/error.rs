use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure surfaced by the toolkit. Each variant maps to a stable
/// machine-readable code (see [`Error::code`]) used by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    BadFormat(String),

    #[error("non-finite sample at lead {lead}, index {index}")]
    NonFinite { lead: usize, index: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("lead order mismatch: {0}")]
    LeadMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("signal too short: need at least {needed} samples, got {found}")]
    SignalTooShort { needed: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unknown token id {0}")]
    UnknownToken(u32),

    #[error("byte {0} is outside the symbol alphabet")]
    SymbolOutOfRange(u8),

    #[error("id range collision: {0}")]
    IdCollision(String),

    #[error("tokenizer file not found: {}", .0.display())]
    NoTokenizer(PathBuf),

    #[error("unsupported version: {0}")]
    VersionMismatch(String),

    #[error("span mismatch: {0}")]
    SpanMismatch(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "E_IO",
            Error::BadFormat(_) => "E_BAD_FORMAT",
            Error::NonFinite { .. } => "E_NON_FINITE",
            Error::DimensionMismatch { .. } => "E_DIMENSION",
            Error::LeadMismatch(_) => "E_LEAD_ORDER",
            Error::InvalidParameter(_) => "E_INVALID_ARG",
            Error::SignalTooShort { .. } => "E_TOO_SHORT",
            Error::EmptyInput(_) => "E_EMPTY",
            Error::UnknownToken(_) => "E_UNKNOWN_ID",
            Error::SymbolOutOfRange(_) => "E_BAD_SYMBOL",
            Error::IdCollision(_) => "E_ID_COLLISION",
            Error::NoTokenizer(_) => "E_NO_TOKENIZER",
            Error::VersionMismatch(_) => "E_VERSION",
            Error::SpanMismatch(_) => "E_SPAN_MISMATCH",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
