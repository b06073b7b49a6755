use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the detection toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing channel `{0}`")]
    MissingChannel(String),

    #[error("duplicate channel `{0}`")]
    DuplicateChannel(String),

    #[error("non-uniform sampling: spacing {spacing} at row {row} deviates from median {median} by more than 1%")]
    NonUniformSampling { row: usize, spacing: f64, median: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value {value} at {context}")]
    NonFinite { value: f64, context: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("single-class labels: every label is {0}")]
    SingleClass(u8),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("incompatible model format version {found} (supported: {supported})")]
    IncompatibleVersion { found: u32, supported: u32 },

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable category, stable across releases.
    pub fn category(&self) -> &'static str {
        match self {
            Error::MissingChannel(_) => "missing-channel",
            Error::DuplicateChannel(_) => "duplicate-channel",
            Error::NonUniformSampling { .. } => "non-uniform-sampling",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Shape(_) => "shape",
            Error::NonFinite { .. } => "numeric",
            Error::Parameter(_) => "parameter",
            Error::Config(_) => "config",
            Error::Degenerate(_) => "degenerate",
            Error::SingleClass(_) => "single-class",
            Error::Domain(_) => "domain",
            Error::IncompatibleVersion { .. } => "incompatible-version",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
