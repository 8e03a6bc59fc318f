use std::path::PathBuf;
use std::process::ExitCode;

use hypersparse::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn file(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::File { path, source }
    }

    pub fn core(context: impl Into<String>) -> impl FnOnce(CoreError) -> Self {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }

    /// 1 verification failure, 2 usage, 3 I/O or parse.
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Core { source, .. } => match source {
                CoreError::InvalidParameter(_) | CoreError::InfeasibleSpec(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            },
            CliError::File { .. } => ExitCode::from(3),
            CliError::Mismatch(_) => ExitCode::from(1),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
