use thiserror::Error;

/// Errors reported by topology construction, routing, control-plane
/// mutation, the analyses and the flow simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("ToR index {index} out of range for a network of {n} ToRs")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid ToR id: {0}")]
    InvalidTorId(String),

    #[error("current ToR already equals the destination; no next hop exists")]
    AlreadyAtDestination,

    #[error("a relay failure is already recorded; multiple failures are unsupported")]
    FailureAlreadyRecorded,

    #[error("no relay failure is recorded")]
    NoFailureRecorded,

    #[error("rule delta does not match the current tables (applied twice?)")]
    StaleRuleDelta,

    #[error("multicast group {0:?} has no members")]
    EmptyGroup(String),

    #[error("unknown multicast group {0:?}")]
    UnknownGroup(String),

    #[error("flow {0:?} sources from the failed relay")]
    SourceIsFailedRelay(String),

    #[error("splitter fanout must be at least 1, got {0}")]
    InvalidFanout(usize),

    #[error("data rate {0:?} missing from the component catalog")]
    UnknownRate(String),

    #[error("splitter fanout {0} missing from the component catalog")]
    UnknownSplitterFanout(usize),

    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),

    #[error("fraction {0} of active sources selects no ToRs")]
    NoActiveSources(f64),

    #[error("invalid capacity model: {0}")]
    InvalidCapacity(String),

    #[error("invalid flow {id:?}: {reason}")]
    InvalidFlow { id: String, reason: String },

    #[error("flow schedule is empty")]
    EmptySchedule,

    #[error("rule tables for {n} ToRs exceed the supported size ({cap})")]
    RuleTableTooLarge { n: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
