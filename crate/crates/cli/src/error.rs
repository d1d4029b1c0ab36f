use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures of a command, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid input files and settings.
    #[error("{0}")]
    Input(String),

    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: ringmod::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Numerical { .. } => 3,
            Self::Internal(_) => 4,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }

    pub fn numerical(context: impl Into<String>, source: ringmod::Error) -> Self {
        Self::Numerical { context: context.into(), source }
    }

    /// Model errors that stem from bad settings rather than numerics.
    pub fn from_model(context: &str, e: ringmod::Error) -> Self {
        use ringmod::Error as E;
        match e {
            E::OutOfRangeBias { .. }
            | E::NonPhysicalFit { .. }
            | E::ForwardBiasLimit { .. }
            | E::HeaterOverdrive { .. }
            | E::BadSeed
            | E::BadPrbsOrder(_)
            | E::EdgeTooSlow { .. }
            | E::OffsetTooLarge { .. }
            | E::InvalidParameter(_) => Self::Input(format!("{context}: {e}")),
            other => Self::numerical(context, other),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Input(format!("{}: {e}", path.display()))
    }

    pub fn data(path: &Path, e: ringmod::io::DataError) -> Self {
        Self::Input(format!("{}: {e}", path.display()))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Resolves `p` against `base` unless it is absolute.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
