use thiserror::Error;

/// Errors produced by the protocol arithmetic, the state machines and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScubaError {
    /// A configuration value violates one of its invariants. `field` is a dotted path.
    #[error("invalid configuration at `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no paging-occasion table entry for i_s={index}, Ns={ns}")]
    MissingLutEntry { index: u32, ns: u32 },

    /// SL paging frames do not exist when the SL-DRX cycle is zero (low-latency mode).
    #[error("SL-DRX cycle is 0 (low-latency mode): no fixed SL paging frame exists")]
    LlmMode,

    #[error("subframe {got} advanced out of order (expected {expected})")]
    Sequencing { expected: u64, got: u64 },

    #[error("destination UE {0} has no SL paging schedule")]
    UnknownDestination(u32),

    #[error("empty sample")]
    NoData,

    /// A runtime protocol invariant was breached during simulation.
    #[error("invariant breached: {0}")]
    Invariant(String),
}

impl ScubaError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ScubaError::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = ScubaError> = std::result::Result<T, E>;
