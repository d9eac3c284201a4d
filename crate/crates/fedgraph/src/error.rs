//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("infeasible generator constraints: {0}")]
    Infeasible(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("unknown node id {0}")]
    UnknownNode(u32),

    #[error("stratum too small to split in jurisdiction {jurisdiction}: {label_kind} stratum has {count} nodes but {parts} splits need at least one each")]
    StratumTooSmall {
        jurisdiction: u32,
        label_kind: &'static str,
        count: usize,
        parts: usize,
    },

    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("empty label set for local loss")]
    EmptyLabels,

    #[error("training diverged on client {client} at epoch {epoch}: non-finite loss")]
    Divergence { client: usize, epoch: usize },

    #[error("round aborted: client {client} diverged at epoch {epoch}")]
    RoundAborted { client: usize, epoch: usize },

    #[error("no encryption key registered for jurisdiction {0}")]
    MissingKey(u32),

    #[error("ciphertext integrity check failed: {0}")]
    Integrity(String),

    #[error("fixed-point range exceeded: |{value}| scales past 2^47")]
    FixedPointRange { value: f64 },

    #[error("update norm {norm} exceeds clip bound {bound}: input must be pre-clipped")]
    UnclippedInput { norm: f64, bound: f64 },

    #[error("privacy parameter out of range: {0}")]
    PrivacyParam(String),

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit code for the CLI: 1 for configuration problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Checkpoint(_) => 1,
            _ => 2,
        }
    }
}
