use std::path::PathBuf;

use maxent_debias_core::Error as CoreError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

/// Process exit status for each failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config = 1,
    Data = 2,
    Numeric = 3,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self::Data(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ExitKind {
        match self {
            Self::Config(_) => ExitKind::Config,
            Self::Data(_) | Self::Io { .. } => ExitKind::Data,
            Self::Core(e) => core_kind(e),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind() as i32
    }
}

fn core_kind(e: &CoreError) -> ExitKind {
    use CoreError::*;
    match e {
        InvalidSchema(_) | MissingRole(_) | NonBinaryProtected(_) | InvalidTau(_) | InvalidMixing(_)
        | InvalidEta(_) | UnboundedRadius | InvalidConfig(_) => ExitKind::Config,
        NonFiniteInput(_) | NotConverged(_) | NumericalBreakdown(_) | QpNotConverged { .. } => {
            ExitKind::Numeric
        }
        _ => ExitKind::Data,
    }
}
