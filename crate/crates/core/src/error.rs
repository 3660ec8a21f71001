use std::path::PathBuf;

use thiserror::Error;
use vpp_lp::LpError;

#[derive(Debug, Error)]
pub enum VppError {
    #[error("invalid horizon: {0}")]
    Horizon(String),

    #[error("invalid device `{id}`: {reason}")]
    Device { id: String, reason: String },

    #[error("network: {0}")]
    Network(String),

    #[error("scenario data: {0}")]
    Scenario(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("Benders stopped after {iterations} iterations with relative gap {gap:.3e}")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("model too large for the extensive form: {rows} rows exceeds the limit of {limit}")]
    SizeGuard { rows: usize, limit: usize },

    #[error("hash mismatch for {what}: expected {expected}, found {found}")]
    HashMismatch {
        what: String,
        expected: String,
        found: String,
    },

    #[error("lp: {0}")]
    Lp(#[from] LpError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl VppError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VppError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, VppError>;
