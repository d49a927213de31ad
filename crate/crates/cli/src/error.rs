use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed configuration {path}: {source}")]
    ConfigSyntax {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("field file {path}: {message}")]
    Field { path: PathBuf, message: String },

    #[error("cannot serialize output: {0}")]
    Serialize(#[from] serde_json::Error),

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("thread pool: {0}")]
    Threads(String),

    #[error("solver did not converge (status {0})")]
    NotConverged(&'static str),

    #[error(transparent)]
    Core(#[from] choquard_core::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_SIGN_COLLAPSE: i32 = 2;
pub const EXIT_NOT_ADMISSIBLE: i32 = 3;
pub const EXIT_CRAMER: i32 = 4;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn field(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Field {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use choquard_core::Error as E;
        match self {
            CliError::Core(E::NotAdmissible(_)) => EXIT_NOT_ADMISSIBLE,
            CliError::Core(E::CramerViolation(_)) => EXIT_CRAMER,
            CliError::Core(E::SignCollapse(_)) => EXIT_SIGN_COLLAPSE,
            _ => EXIT_OTHER,
        }
    }

    /// Short machine-readable tag used in `report.json`.
    pub fn kind(&self) -> &'static str {
        use choquard_core::Error as E;
        match self {
            CliError::Io { .. } => "io",
            CliError::ConfigSyntax { .. } => "config_syntax",
            CliError::Config(_) => "config",
            CliError::Field { .. } => "field_file",
            CliError::Serialize(_) | CliError::Csv(_) => "output",
            CliError::Threads(_) => "threads",
            CliError::NotConverged(_) => "not_converged",
            CliError::Core(e) => match e {
                E::NotAdmissible(_) => "not_admissible",
                E::CramerViolation(_) => "cramer_failure",
                E::SignCollapse(_) => "sign_collapse",
                E::InvalidGrid(_) | E::GridMismatch(_) => "grid",
                E::OutOfRange(_) => "out_of_range",
                _ => "solver",
            },
        }
    }
}
