use std::path::PathBuf;

use repairflow_core::Error as CoreError;

/// Problems with a configuration file; all map to exit status 2.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Numerical(#[from] CoreError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_INCONCLUSIVE: u8 = 4;

/// Exit status for a core error.
pub fn core_exit_code(e: &CoreError) -> u8 {
    match e {
        CoreError::InvalidParameter { .. } | CoreError::Domain { .. } | CoreError::Shape { .. } => {
            EXIT_CONFIG
        }
        CoreError::ConvergedBeforeWindow
        | CoreError::InsufficientData { .. }
        | CoreError::Inconclusive(_) => EXIT_INCONCLUSIVE,
        CoreError::Precondition(_)
        | CoreError::NearSingular { .. }
        | CoreError::UndefinedQuotient { .. }
        | CoreError::GainViolation { .. }
        | CoreError::Construction(_) => EXIT_NUMERICAL,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Format { .. } => EXIT_CONFIG,
            CliError::Numerical(e) => core_exit_code(e),
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
