use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("band count mismatch: {what} (expected {expected}, found {found})")]
    BandMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("calibration degenerate: band {band}, column {column} has fewer than 2 valid pixels")]
    CalibrationDegenerate { band: usize, column: usize },

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("undefined measure: {0}")]
    UndefinedMeasure(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("trailing data after payload: {0} extra bytes")]
    TrailingData(usize),

    #[error("dimension overflow: {width}x{height}x{bands}")]
    DimensionOverflow { width: u64, height: u64, bands: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing dataset: {0}")]
    MissingDataset(String),

    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
