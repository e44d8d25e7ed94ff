use std::path::PathBuf;

use scuba_core::ScubaError;

/// Process exit statuses. CI gates on these.
pub mod exit {
    pub const OK: u8 = 0;
    /// A reproduction target missed a tolerance.
    pub const TOLERANCE: u8 = 1;
    pub const CONFIG: u8 = 2;
    /// A protocol invariant broke at runtime, or output could not be written.
    pub const RUNTIME: u8 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad scenario document, override or flag. `field` is a dotted path when known.
    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{0}")]
    Usage(String),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] ScubaError),

    #[error("{failed} of {total} checks outside tolerance")]
    Tolerance { failed: usize, total: usize },
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into().trim_end().to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) | CliError::Read { .. } => exit::CONFIG,
            CliError::Core(e) => match e {
                ScubaError::InvalidConfig { .. }
                | ScubaError::InvalidArgument(_)
                | ScubaError::MissingLutEntry { .. }
                | ScubaError::LlmMode
                | ScubaError::UnknownDestination(_) => exit::CONFIG,
                ScubaError::Sequencing { .. } | ScubaError::NoData | ScubaError::Invariant(_) => exit::RUNTIME,
            },
            CliError::Write { .. } => exit::RUNTIME,
            CliError::Tolerance { .. } => exit::TOLERANCE,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
