use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid shape {0}: every extent must be at least 1")]
    InvalidShape(String),
    #[error("data length {got} does not match shape volume {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch { context: &'static str, expected: Vec<usize>, got: Vec<usize> },
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("no preset for {0}; supply an explicit config")]
    NoPreset(String),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("stratification impossible: {0}")]
    Stratification(String),
    #[error("training diverged (seed {seed}, epoch {epoch}, step {step}): loss is not finite")]
    Diverged { seed: u64, epoch: usize, step: usize },
    #[error("gradient check failed at {location}: relative error {rel_error:.3e} > {tolerance:.1e}")]
    CheckFailed { location: String, rel_error: f64, tolerance: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: truncated record at byte offset {offset}")]
    Truncated { path: PathBuf, offset: u64 },
    #[error("{path}: corrupt record at byte offset {offset} (label byte {label})")]
    CorruptRecord { path: PathBuf, offset: u64, label: u8 },
    #[error("unexpected record count in {path}: expected {expected}, found {found}")]
    RecordCount { path: PathBuf, expected: usize, found: usize },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("table format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
