//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Integration could not continue (step-size underflow, blowup).
    /// Carries the last time at which the state was still valid.
    #[error("integration failed at t = {t_last}: {reason}")]
    IntegrationFailure { t_last: f64, reason: String },

    #[error("channel index {index} out of range for {n_channels} channels")]
    ChannelOutOfRange { index: usize, n_channels: usize },

    #[error("series too short: need at least {needed} samples, have {available}")]
    SeriesTooShort { needed: usize, available: usize },

    #[error("series misaligned: {0}")]
    MisalignedSeries(String),

    /// Constant or otherwise degenerate input (zero entropy, zero variance).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("no local minimum found in curve")]
    NoMinimum,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training aborted: non-finite loss at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },

    #[error("histogram bin edges mismatch")]
    EdgeMismatch,

    #[error("model file error: {0}")]
    ModelFile(String),

    #[error("checksum mismatch for {path}")]
    ChecksumMismatch { path: String },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
