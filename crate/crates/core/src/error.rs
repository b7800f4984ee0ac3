use thiserror::Error;

use crate::trace::TrainTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing assumption constant `{0}` for the requested schedule")]
    MissingConstant(&'static str),

    #[error("PL constant unavailable: the loss has no strong-convexity weight (lambda = 0)")]
    PlConstantUnavailable,

    /// `zeta` must lie in `[exp(-p/8), 1)` for the noise-norm bound to apply.
    #[error("concentration regime violated: zeta = {zeta} is outside [{lower}, 1) for p = {p}")]
    ConcentrationRegime { zeta: f64, p: usize, lower: f64 },

    /// Training aborted; the trace holds every completed iteration.
    #[error("divergence at iteration {iteration}: {reason}")]
    Divergence {
        iteration: usize,
        reason: String,
        partial: Box<TrainTrace>,
    },

    #[error("oracle not converged after {iterations} iterations (gradient norm {grad_norm:e})")]
    OracleNotConverged { iterations: usize, grad_norm: f64 },

    #[error("index {index} out of range for dataset of size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("replacement example has row norm {norm} > 1")]
    ReplacementNorm { norm: f64 },

    #[error("heterogeneous reports: {0}")]
    Heterogeneous(String),
}
