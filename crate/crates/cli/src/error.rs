use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Artifact { path: PathBuf, source: ttchaos::Error },

    #[error(transparent)]
    Core(#[from] ttchaos::Error),
}

impl CliError {
    pub fn artifact(path: impl Into<PathBuf>) -> impl FnOnce(ttchaos::Error) -> Self {
        let path = path.into();
        move |source| Self::Artifact { path, source }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Config(_) => ExitCode::from(4),
            Self::Core(ttchaos::Error::Guard { .. }) => ExitCode::from(3),
            Self::Artifact { .. } | Self::Core(_) => ExitCode::from(1),
        }
    }
}
