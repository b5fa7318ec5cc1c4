use std::fmt;
use std::path::PathBuf;

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    /// `--script` only: the test rejected at the requested level.
    pub const REJECT: u8 = 2;
    /// Bad flags, bad configuration or malformed input files.
    pub const USAGE: u8 = 64;
    /// Well-formed input the procedure cannot use.
    pub const DATA: u8 = 65;
    pub const NO_INPUT: u8 = 66;
    pub const SOFTWARE: u8 = 70;
    pub const IO: u8 = 74;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: line {line}, column {column}: {reason}")]
    Malformed {
        path: PathBuf,
        line: u64,
        column: String,
        reason: String,
    },

    #[error("{0}")]
    Data(String),

    #[error("cannot read {path}: {source}")]
    Input { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] ract_core::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use ract_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Malformed { .. } => exit::USAGE,
            CliError::Data(_) => exit::DATA,
            CliError::Input { .. } => exit::NO_INPUT,
            CliError::Output { .. } => exit::IO,
            CliError::Internal(_) => exit::SOFTWARE,
            CliError::Core(e) => match e {
                E::Parameter { .. } | E::Config(_) => exit::USAGE,
                E::Data(_)
                | E::InsufficientData { .. }
                | E::Degenerate(_)
                | E::SingularDesign
                | E::IllPosedSubspace { .. }
                | E::UndefinedRatio(_) => exit::DATA,
            },
        }
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
