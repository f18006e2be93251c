use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: invalid UTF-8 on line {line}")]
    Encoding { path: PathBuf, line: usize },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("alignment error at row {row}: {message}")]
    Alignment { row: usize, message: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Process exit status for this error: 1 for bad input or misaligned
    /// predictions, 2 for I/O, 3 for anything internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Parse { .. }
            | Error::Encoding { .. }
            | Error::Validation(_)
            | Error::Alignment { .. }
            | Error::Format(_) => 1,
            Error::Numerical(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}
