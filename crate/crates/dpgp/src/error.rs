use std::path::PathBuf;

/// Errors of the pipeline commands, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, configuration or input files.
    #[error("{0}")]
    Invalid(String),
    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] dpgp_core::error::Error),
}

pub type CliResult<T> = Result<T, CliError>;

/// Exit code on success.
pub const EXIT_OK: i32 = 0;
/// Exit code for I/O failures while writing outputs.
pub const EXIT_IO: i32 = 1;
/// Exit code for invalid arguments, configuration or inputs.
pub const EXIT_INVALID: i32 = 2;
/// Exit code for numerical divergence.
pub const EXIT_DIVERGED: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use dpgp_core::error::Error as E;
        match self {
            CliError::Invalid(_) | CliError::UnknownKeys(_) | CliError::Read { .. } => EXIT_INVALID,
            CliError::Write { .. } => EXIT_IO,
            CliError::Core(
                E::Divergence { .. } | E::EnsembleAborted { .. } | E::NonFinite(_) | E::NotPositiveDefinite | E::NoConvergence,
            ) => EXIT_DIVERGED,
            CliError::Core(_) => EXIT_INVALID,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }
}

pub(crate) fn read_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Read {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    }
}
