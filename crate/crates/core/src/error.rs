use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("channel file {}: {reason}", path.display())]
    ChannelFile { path: PathBuf, reason: String },

    #[error("scenario validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    #[error(
        "minimum rate infeasible for line {line}: r_min = {r_min_bps:.6e} bit/s \
         exceeds the line's sum-rate-optimal rate {srop_bps:.6e} bit/s"
    )]
    InfeasibleMinRate {
        line: usize,
        r_min_bps: f64,
        srop_bps: f64,
    },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("missing artifact {}: {reason}", path.display())]
    MissingArtifact { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
