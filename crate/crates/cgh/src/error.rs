//! Error types shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CghError>;

#[derive(Debug, Error)]
pub enum CghError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("conflicting duplicate rating for user {user}, item {item}")]
    DuplicateEntry { user: u32, item: u32 },

    #[error("corpus has no terms")]
    EmptyVocabulary,

    #[error("degenerate split: warm training set would be empty")]
    DegenerateSplit,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("singular normal equations for {side} row {row}; regularization too small")]
    SingularSystem { side: &'static str, row: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("k={k} exceeds candidate count n={n}")]
    KExceedsN { k: usize, n: usize },

    #[error("constrained code selection requires user codes")]
    MissingUserCodes,

    #[error("probability component outside the open interval (0,1)")]
    DomainError,

    #[error("config: {0}")]
    Config(String),

    #[error("corrupt artifact {path}: {message}")]
    CorruptArtifact { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CghError {
    /// Process exit code class used by the CLI: 2 bad arguments/config,
    /// 3 missing or corrupt input artifact, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CghError::Config(_) => 2,
            CghError::NonFiniteLoss { .. } | CghError::SingularSystem { .. } => 4,
            _ => 3,
        }
    }
}
