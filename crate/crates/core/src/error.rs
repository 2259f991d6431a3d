use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes used by the command line front end.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const MISSING_PREREQUISITE: i32 = 3;
    pub const BACKEND: i32 = 4;
    pub const CONTRACT: i32 = 5;
    pub const OTHER: i32 = 1;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing prerequisite artifact: {}", .0.display())]
    MissingPrerequisite(PathBuf),

    /// Retryable failures that exhausted their retry budget. The run can be
    /// resumed from the persisted cache.
    #[error("backend unavailable{}: {message}", at.as_ref().map(|p| format!(" (resume at prompt {p})")).unwrap_or_default())]
    BackendUnavailable { message: String, at: Option<String> },

    /// The remote side answered, but with something that breaks the contract.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("lexicon error at line {line}: {message}")]
    Lexicon { line: usize, message: String },

    #[error("incompatible template/keyword pair: {template} x {surface}")]
    Incompatible { template: String, surface: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Lexicon { .. } => exit_code::CONFIG,
            Error::MissingPrerequisite(_) => exit_code::MISSING_PREREQUISITE,
            Error::BackendUnavailable { .. } => exit_code::BACKEND,
            Error::Contract(_) | Error::Incompatible { .. } => exit_code::CONTRACT,
            Error::InvalidArgument(_) => exit_code::CONTRACT,
            Error::Io { .. } | Error::Json(_) => exit_code::OTHER,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
