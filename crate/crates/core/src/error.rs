use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum MvError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}:{column}: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("index {index} out of range 1..={len}")]
    OutOfRange { index: usize, len: usize },

    #[error("rank-deficient local fit at pixel ({row}, {col})")]
    RankDeficient { row: usize, col: usize },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<MvError>,
    },
}

impl MvError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MvError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        MvError::Invalid(msg.into())
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        MvError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 for bad input, 3 for numerical or structural failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            MvError::Io { .. }
            | MvError::Parse { .. }
            | MvError::Invalid(_)
            | MvError::OutOfRange { .. } => 2,
            MvError::RankDeficient { .. } | MvError::Structural(_) | MvError::Numerical(_) => 3,
            MvError::Stage { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T, E = MvError> = std::result::Result<T, E>;
