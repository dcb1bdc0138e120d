use thiserror::Error;

use crate::convex::GapReport;

/// Errors produced anywhere in the homogenization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("table has no finite value")]
    DomainEmpty,

    #[error("conjugate argmax lies on the input box boundary at output node {node:?}")]
    BoxTooSmall { node: Vec<f64> },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("table is not convex: midpoint violation {violation:.3e} at {point:?}")]
    NotConvex { point: Vec<f64>, violation: f64 },

    #[error("empty graph image at a = {point:?}")]
    EmptyImage { point: Vec<f64> },

    #[error("growth bound violated by {violation:.3e} at x = {x:?}, xi = {xi:?}, eta = {eta:?}")]
    GrowthViolation {
        x: Vec<f64>,
        xi: Vec<f64>,
        eta: Vec<f64>,
        violation: f64,
    },

    #[error("selfdualization failed: gap {:.3e} at {:?}", .0.max_gap, .0.argmax_point)]
    SelfdualizationFailed(GapReport),

    #[error("solver stalled after {iterations} iterations (residual {residual:.3e}) at {point:?}")]
    SolverStalled {
        point: Vec<f64>,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("subdifferential is set-valued, interval hull {hull:?}")]
    SetValued { hull: Vec<(f64, f64)> },

    #[error("lagrangian carries no growth record")]
    CoercivityMissing,

    #[error("precomputation required: {0}")]
    PrecomputeRequired(String),

    #[error("extracted graph is not monotone near a = {a:?}")]
    NonMonotone { a: Vec<f64> },

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("report error: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
