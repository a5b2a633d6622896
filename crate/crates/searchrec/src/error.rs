use std::path::{Path, PathBuf};

use thiserror::Error;

/// Everything the CLI can fail with. Validation errors (bad input or config)
/// exit with 2, stage failures with 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("stage `{stage}` failed: {cause}")]
    Stage { stage: &'static str, cause: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Validation(_) | Error::Input { .. } => 2,
            Error::Stage { .. } | Error::Io { .. } => 3,
        }
    }

    pub(crate) fn input(path: &Path, message: impl std::fmt::Display) -> Self {
        Error::Input { path: path.to_path_buf(), message: message.to_string() }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn stage(stage: &'static str, cause: impl std::fmt::Display) -> Self {
        Error::Stage { stage, cause: cause.to_string() }
    }
}
