use std::path::PathBuf;
use std::process::ExitCode;

use macroent::error::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read `{path}`: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write output `{path}`: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} oracle checks failed")]
    Verify { failed: usize, total: usize },
    #[error(transparent)]
    Lib(#[from] Error),
}

impl CliError {
    /// Exit status per error class; 2 matches clap's own usage errors.
    pub fn exit_code(&self) -> ExitCode {
        let code = match self {
            CliError::Usage(_) => 2,
            CliError::Lib(Error::UnknownState(_)) => 3,
            CliError::Lib(Error::Capacity { .. }) => 4,
            CliError::Lib(Error::InvalidArgument(_)) => 2,
            CliError::Output { .. } => 5,
            CliError::Input { .. } | CliError::Lib(Error::Parse { .. }) => 6,
            CliError::Verify { .. } => 7,
            CliError::Lib(_) => 1,
        };
        ExitCode::from(code)
    }
}
