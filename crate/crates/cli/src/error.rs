use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid, missing or unknown configuration key.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed input file.
    #[error("input error in {path}: {msg}")]
    Input { path: PathBuf, msg: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] eitsim::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input { .. } => 2,
            CliError::Core(e) => match e {
                eitsim::Error::Domain(_) | eitsim::Error::Config(_) | eitsim::Error::Data(_) => 2,
                eitsim::Error::Degenerate(_) | eitsim::Error::Numerical(_) => 3,
            },
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub(crate) fn input(path: &std::path::Path, msg: impl Into<String>) -> Self {
        CliError::Input { path: path.to_path_buf(), msg: msg.into() }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
