//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    /// A dataset or model file violates an invariant (bad label, ragged row,
    /// non-finite value, ...). The message names the offending sample.
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The reservoir state became non-finite at step `k`, node `n` (1-based).
    #[error("reservoir diverged at step {k}, node {n}")]
    Divergence { k: usize, n: usize },

    /// Every sample in a training epoch diverged; no update could be applied.
    #[error("training diverged: every sample in epoch {epoch} produced non-finite values")]
    TrainingDiverged { epoch: usize },

    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
