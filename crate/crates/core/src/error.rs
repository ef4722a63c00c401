use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("at least 2 states are required, got {0}")]
    TooFewStates(usize),

    #[error("switch probability {p_switch} outside the open interval (0, {upper}) for {n_states} states")]
    InvalidSwitchProbability {
        p_switch: f64,
        n_states: usize,
        upper: f64,
    },

    #[error("state index {index} out of range for {n_states} states")]
    StateOutOfRange { index: usize, n_states: usize },

    #[error("correlation {0} is outside (-1, 1)")]
    CorrelationOutOfRange(f64),

    #[error("non-finite value {value} at window {window}, state {state}")]
    NonFinite {
        window: usize,
        state: usize,
        value: f64,
    },

    #[error("invalid emission model: {0}")]
    InvalidEmission(String),

    #[error("not enough labelled samples: {attended} attended, {unattended} unattended (need 2 of each)")]
    InsufficientSamples { attended: usize, unattended: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("log-sum-exp of an empty slice")]
    EmptyInput,

    #[error("log-sum-exp of all -inf entries")]
    AllNegativeInfinity,

    #[error("exhaustive enumeration of {n_states}^{n_windows} paths exceeds the cap of {cap}")]
    InstanceTooLarge {
        n_states: usize,
        n_windows: usize,
        cap: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("target accuracy {target} must lie in ({chance}, 1)")]
    TargetOutOfRange { target: f64, chance: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("trial {trial} at {axis} = {value} (seed {seed}): {source}")]
    Trial {
        axis: String,
        value: f64,
        trial: usize,
        seed: u64,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
