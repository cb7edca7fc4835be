use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("no valid pixel pairs for offset ({dx}, {dy}) on a {width}x{height} image")]
    EmptyPairs {
        dx: i32,
        dy: i32,
        width: usize,
        height: usize,
    },

    #[error("patch size {patch} exceeds image dimensions {width}x{height}")]
    NoPatches {
        patch: usize,
        width: usize,
        height: usize,
    },

    #[error("split error: {0}")]
    Split(String),

    #[error("threshold ordering violated: low {low} > high {high}")]
    Ordering { low: f64, high: f64 },

    #[error("objective undefined: reliable positive and negative sets are both empty")]
    UndefinedObjective,

    #[error("training error: {0}")]
    Training(String),

    #[error("agent init error: {0}")]
    AgentInit(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("no reward is defined for epoch 0")]
    NoReward,

    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("confusion matrix is empty")]
    EmptyConfusion,

    #[error("AUC undefined: ground truth contains a single class")]
    UndefinedAuc,

    #[error("empty channel trace")]
    EmptyTrace,

    #[error("malformed input {path}:{line}: {msg}")]
    Malformed {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
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

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
