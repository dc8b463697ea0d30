use std::path::PathBuf;

use thiserror::Error;

/// Every fallible operation in the crate reports through this type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("dataset has no labels")]
    UnlabeledDataset,

    #[error("requested {requested} constraints but the dataset only has {available} samples")]
    TooManyConstraints { requested: usize, available: usize },

    #[error("normalized entropy is undefined for a single output cluster")]
    UndefinedEntropy,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("optimizer already completed all {total} steps")]
    StepAfterCompletion { total: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(
        "non-finite loss at step {step} (lr={lr}, loss_cons={loss_cons}, loss_pseudo={loss_pseudo}, \
         selected={selected}, pseudo_pairs={pseudo_pairs})"
    )]
    NonFiniteLoss {
        step: usize,
        lr: f64,
        loss_cons: f64,
        loss_pseudo: f64,
        selected: usize,
        pseudo_pairs: usize,
    },

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("unknown dataset preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unsupported checkpoint version {0}")]
    CheckpointVersion(u32),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Whether the error stems from bad user input rather than a failure
    /// while running.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::Parse { .. }
                | Error::UnknownSuite(_)
                | Error::UnknownPreset(_)
                | Error::Config(_)
                | Error::CheckpointVersion(_)
        )
    }
}
