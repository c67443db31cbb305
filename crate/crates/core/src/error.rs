use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} lies outside the declared domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("non-finite value produced: {0}")]
    NonFinite(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("reference point is not on the graph (residual {residual:e})")]
    NotOnGraph { residual: f64 },

    #[error("matrix is rank deficient (rank {rank}, needed {needed})")]
    RankDeficient { rank: usize, needed: usize },

    #[error("descent oracle returned an off-graph pair (residual {residual:e}) for x={x:?}, v={v:?}, y={y:?}")]
    OracleOffGraph {
        x: Vec<f64>,
        v: Vec<f64>,
        y: Vec<f64>,
        residual: f64,
    },

    #[error("covering precondition fails: c = {c} is not below sur A - calm(f - A) = {sur} - {calm}")]
    CoveringPrecondition { c: f64, sur: f64, calm: f64 },

    #[error("subproblem infeasible at x_k={x:?}")]
    SubproblemInfeasible { x: Vec<f64> },

    #[error("too few iterates for a rate report: {0} (need at least 3)")]
    TooFewIterates(usize),

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("unknown corpus entry `{0}`")]
    UnknownExample(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
