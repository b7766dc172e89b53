use std::path::PathBuf;

use chunkscope::Error;

/// CLI failure, mapped to a process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("{0}")]
    Runner(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub const EXIT_CONFIG: i32 = 2;
    pub const EXIT_CAPABILITY: i32 = 3;
    pub const EXIT_RUNNER: i32 = 4;

    /// Core errors are sorted into config, capability and runner failures.
    pub fn from_core(e: Error) -> Self {
        match e {
            Error::Capability(m) => CliError::Capability(m),
            Error::InvalidArgument(m) => CliError::Config(m),
            other => CliError::Runner(other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => Self::EXIT_CONFIG,
            CliError::Capability(_) => Self::EXIT_CAPABILITY,
            CliError::Runner(_) | CliError::Output { .. } => Self::EXIT_RUNNER,
        }
    }
}
