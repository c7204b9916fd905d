use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure classes, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or inputs that violate an operation's preconditions.
    Input,
    /// A numerical routine could not produce a trustworthy result.
    Numeric,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("frame is empty")]
    EmptyFrame,

    #[error("sample {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("reference signal has zero energy")]
    ZeroEnergyReference,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "relaxation {lambda} is outside (0, 2/p) = (0, {bound:.6}) for mask rate p = {p:.6}; \
         the mean iterate diverges when |1 - lambda*p| >= 1"
    )]
    RelaxationOutOfRange { lambda: f64, p: f64, bound: f64 },

    #[error("symbol {value} at position {index} is not +1 or -1")]
    InvalidSymbol { index: usize, value: i8 },

    #[error("mask retains {retained} samples, at least {required} needed")]
    TooFewRetained { retained: usize, required: usize },

    #[error("least-squares refit is rank deficient with {columns} columns")]
    RankDeficient { columns: usize },

    #[error("malformed bitstream: {0}")]
    Bitstream(String),

    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::RankDeficient { .. } => ErrorKind::Numeric,
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => ErrorKind::Io,
            _ => ErrorKind::Input,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
