use std::path::PathBuf;

use regime_dividends::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_NO_CONVERGENCE: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Core(e) => core_exit_code(e),
            Self::Io { .. } | Self::Usage(_) => EXIT_INPUT,
            Self::VerificationFailed(_) => EXIT_VERIFY,
        }
    }
}

/// Solver failures map to 2, everything the caller could fix to 1.
pub fn core_exit_code(e: &Error) -> u8 {
    match e {
        Error::NoConvergence { .. }
        | Error::MaximumAtCap { .. }
        | Error::OrderingUnresolved(_)
        | Error::SingularLinearSystem { .. }
        | Error::RootIsolationFailure(_)
        | Error::NotConcavePayoff { .. }
        | Error::BarrierOutOfRange { .. }
        | Error::Internal(_) => EXIT_NO_CONVERGENCE,
        _ => EXIT_INPUT,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
