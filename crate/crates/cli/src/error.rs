use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] scint_core::Error),

    /// A run finished but broke a checked invariant.
    #[error("invariant violated: {0}")]
    Violation(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Violation(_) | Self::Core(scint_core::Error::Integrity(_)) => 3,
            _ => 2,
        }
    }
}
