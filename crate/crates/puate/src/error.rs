//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by fitting, estimation, data generation and export.
#[derive(Debug, Error)]
pub enum PuError {
    /// Normal equations are singular (or numerically so) with no ridge.
    #[error("singular design: {0}")]
    SingularDesign(String),
    /// Malformed input: non-finite values, length or dimension mismatch, bad parameter.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A labeled/positive class is required but absent.
    #[error("no positive samples: {0}")]
    NoPositives(String),
    /// A negative/unlabeled class is required but absent.
    #[error("no negative samples: {0}")]
    NoNegatives(String),
    /// An empty dataset was supplied where data is required.
    #[error("no data: {0}")]
    NoData(String),
    /// A cross-fitting training complement cannot support the nuisance fits.
    #[error("degenerate fold {fold}: {reason}")]
    DegenerateFold { fold: usize, reason: String },
    /// A CSV cell failed to parse (1-based data row, 1-based column).
    #[error("csv error at row {row}, column {col}: {message}")]
    CsvError {
        row: usize,
        col: usize,
        message: String,
    },
    /// A CSV or scenario file does not match its declared schema.
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("io error: {0}")]
    IoError(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PuError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(PuError::InvalidInput(msg.into()))
}
