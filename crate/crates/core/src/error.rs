use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP spec: {0}")]
    InvalidSpec(String),

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid action {action} (n_actions = {n_actions})")]
    InvalidAction { action: usize, n_actions: usize },

    #[error("return support grew to {atoms} atoms, cap is {cap}")]
    SupportCapExceeded { atoms: usize, cap: usize },

    #[error("malformed policy: {0}")]
    MalformedPolicy(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("quantile level {0} outside [0, 1]")]
    InvalidTau(f64),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("length mismatch in {what}: {a} vs {b}")]
    LengthMismatch {
        what: &'static str,
        a: usize,
        b: usize,
    },

    #[error("replay buffer holds {size} transitions, {requested} requested")]
    BufferUnderfilled { size: usize, requested: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("plot: {0}")]
    Plot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
