use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDist(String),

    #[error("moment of order {p} diverges or could not be integrated")]
    DivergentMoment { p: f64 },

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("law is not subgaussian: E exp((tX)^2) diverges on every probed t")]
    NotSubgaussian,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("{what} budget exceeded: need {needed:e}, limit {limit:e}")]
    Budget {
        what: &'static str,
        needed: f64,
        limit: f64,
    },

    #[error("unbounded objective: {0}")]
    Unbounded(String),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<V> = std::result::Result<V, Error>;
