use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Validation(String),
    #[error("ground truth unavailable: {0}")]
    NoTruth(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] flextrace::Error),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// 2 invalid spec, 3 no ground truth, 4 input/output.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 2,
            HarnessError::NoTruth(_) => 3,
            HarnessError::Io { .. } => 4,
            HarnessError::Core(e) => match e {
                flextrace::Error::Io { .. } | flextrace::Error::Parse { .. } => 4,
                _ => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
