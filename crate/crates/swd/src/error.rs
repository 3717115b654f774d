use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] swd_core::Error),
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("invalid simulation plan: {0}")]
    Plan(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl Error {
    /// 0 success, 2 input error, 3 degenerate statistics, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(swd_core::Error::DegenerateVariance) => 3,
            Error::Core(_) | Error::Parse { .. } | Error::Input { .. } | Error::Plan(_) => 2,
            Error::Json(e) if e.is_syntax() || e.is_data() || e.is_eof() => 2,
            Error::Io { .. } | Error::Json(_) | Error::Csv(_) | Error::Pool(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
