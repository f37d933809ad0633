use std::path::{Path, PathBuf};

use thiserror::Error;

/// Why a command failed. Each kind maps to its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("missing artifact {} (run `prosynth {stage}` first)", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },
    /// Carries the library's own message, which names its kind.
    #[error("{0}")]
    Model(String),
}

impl CliError {
    pub const CONFIG_EXIT: i32 = 2;
    pub const IO_EXIT: i32 = 3;
    pub const MODEL_EXIT: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => Self::CONFIG_EXIT,
            CliError::Io { .. } | CliError::MissingArtifact { .. } => Self::IO_EXIT,
            CliError::Model(_) => Self::MODEL_EXIT,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Attributes a library error to `path`: format and I/O problems are I/O
    /// errors, everything else a model error.
    pub(crate) fn at(path: &Path, err: prosynth::Error) -> Self {
        use prosynth::Error as E;
        match err {
            E::Io(_) | E::Csv(_) | E::Json(_) | E::Schema(_) => {
                CliError::Io { path: path.to_path_buf(), message: err.to_string() }
            }
            other => CliError::Model(other.to_string()),
        }
    }
}

impl From<prosynth::Error> for CliError {
    fn from(err: prosynth::Error) -> Self {
        CliError::Model(err.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
