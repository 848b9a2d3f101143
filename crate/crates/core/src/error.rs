use std::path::PathBuf;

use thiserror::Error;

/// Simulation-level failures.
#[derive(Debug, Error)]
pub enum SimError {
    /// State left the configured magnitude bounds or became non-finite.
    #[error("numerical divergence at t={time}s: {detail}")]
    NumericalDivergence { time: f64, detail: String },
}

/// Configuration loading and validation failures.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file not found: {0}")]
    NotFound(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid override `{key}`: {message}`")]
    Override { key: String, message: String },
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

/// Checkpoint persistence failures.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("failed to access checkpoint {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} is not a checkpoint (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("checkpoint {path} has format version {found}, this build reads version {expected}")]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("failed to decode checkpoint {path}: {message}")]
    Decode { path: PathBuf, message: String },
}

/// Evaluation failures.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("velocity trace is empty")]
    EmptyTrace,
    #[error("unknown scenario name `{0}`, valid names: {1}")]
    UnknownScenario(String, String),
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}
