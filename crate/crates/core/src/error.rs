use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("partition is not Markov for this map: image of cell {cell} has endpoint {endpoint} off the breakpoint grid")]
    MarkovViolation { cell: usize, endpoint: f64 },

    #[error("refinement produced a cell of length {length:.3e}, below the minimum {min:.3e}")]
    RefinementDegenerate { length: f64, min: f64 },

    #[error("index {index} out of range for order {order}")]
    IndexOutOfRange { index: usize, order: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("hole {hole}: {source}")]
    AtHole {
        hole: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient data: {points} usable points in the fit window, need at least 3")]
    InsufficientData { points: usize },

    #[error("map spec: {0}")]
    MapSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
