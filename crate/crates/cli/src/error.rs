use std::path::PathBuf;

use thiserror::Error;

/// Failures of a subcommand, each with a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] enclosure::Error),

    #[error("stale inputs: {0}")]
    Stale(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0} verification check(s) failed")]
    VerifyFailed(usize),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 2 geometry, 3 staleness, 4 no decay, 5 numerical accuracy,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use enclosure::Error as E;
        match self {
            CliError::Core(E::Geometry(_) | E::UnsupportedGeometry(_)) => 2,
            CliError::Stale(_) => 3,
            CliError::Core(E::NoDecay(_) | E::InsufficientData(_)) => 4,
            CliError::Core(E::Accuracy(_) | E::Instability { .. } | E::InsufficientRange(_)) => 5,
            CliError::VerifyFailed(_) => 5,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
