use std::path::{Path, PathBuf};

/// Failures of a command, with their exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] lmest_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// The command finished and wrote its outputs, but a fit did not converge.
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 0 success, 1 usage or parse, 2 non-convergence, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(lmest_core::Error::Usage(_)) => 1,
            CliError::Model(lmest_core::Error::NotConverged { .. }) => 2,
            CliError::Model(_) => 3,
            CliError::Io { .. } | CliError::Parse(_) | CliError::Usage(_) => 1,
            CliError::NotConverged(_) => 2,
        }
    }
}
