use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |A - A^dagger| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("trace is {trace:.12}, expected 1")]
    TraceNotOne { trace: f64 },

    #[error("expected a {expected}-dimensional object, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("vector is not unit length: norm = {norm:.12}")]
    NotUnit { norm: f64 },

    #[error("probabilities sum to {sum:.6}, expected 1")]
    Normalization { sum: f64 },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("circuit mixes representations")]
    MixedRepresentations,

    #[error("circuit is empty")]
    EmptyCircuit,

    #[error("direction not reachable by the analyzer: residual {residual:.3e}")]
    NoSolution { residual: f64 },

    #[error("unknown direction name `{0}`")]
    UnknownDirection(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
