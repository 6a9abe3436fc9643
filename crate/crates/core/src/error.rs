use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// Bad magic, unsupported version or malformed metadata.
    #[error("format error: {0}")]
    Format(String),

    /// The payload ended early or carries trailing bytes.
    #[error("corrupt archive: {0}")]
    Corruption(String),

    /// Decoded values violate a data-model invariant (NaN, empty sentence, ...).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate zero vector at sentence {sentence}, token {token}")]
    DegenerateVector { sentence: usize, token: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("invalid metric configuration: {0}")]
    Config(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("index {index} out of range for archive of {len} sentences")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("pair {pair_id}: {source}")]
    Pair {
        pair_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stable machine-readable identifier for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Format(_) => "format",
            Error::Corruption(_) => "corruption",
            Error::Validation(_) => "validation",
            Error::Precondition(_) => "precondition",
            Error::DegenerateVector { .. } => "degenerate_vector",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Normalization(_) => "normalization",
            Error::Config(_) => "config",
            Error::NumericalDegeneracy(_) => "numerical_degeneracy",
            Error::UndefinedCorrelation(_) => "undefined_correlation",
            Error::Parse { .. } => "parse",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::Pair { source, .. } => source.code(),
        }
    }
}
