use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the command-line driver, each with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent input files or flags.
    #[error("{0}")]
    Input(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Model(#[from] cjmle::Error),

    #[error("fit did not converge within {iterations} iterations (rerun with --allow-nonconverged to accept)")]
    NotConverged { iterations: usize },

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Model(e) => match e {
                cjmle::Error::Shape(_) | cjmle::Error::InvalidData(_) | cjmle::Error::InvalidConfig(_) => 2,
                _ => 1,
            },
            CliError::NotConverged { .. } => 3,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
