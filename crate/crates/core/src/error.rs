use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is not on the manifold (constraint violation {0:e})")]
    NotOnManifold(f64),

    #[error("vector is not tangent at its base point (violation {0:e})")]
    NotTangent(f64),

    #[error("tangent vector is based at a different point")]
    BaseMismatch,

    #[error("points are antipodal; no unique minimal geodesic joins them")]
    Antipodal,

    #[error("invalid constraint set: {0}")]
    InvalidSet(String),

    #[error("metric projection is not supported for {0}")]
    ProjectionUnsupported(&'static str),

    #[error("constraint set is not compact ({0}); grid oracles need a compact set")]
    NotCompact(&'static str),

    #[error("bifunction has no subgradient oracle and is not flagged smooth")]
    NoSubgradient,

    #[error("missing subgradient oracle for nonsmooth player {0}")]
    MissingPlayerOracle(usize),

    #[error("step condition violated: lambda * L = {product:.6e} is not below D_kappa/4 = {bound:.6e}")]
    StepCondition { product: f64, bound: f64 },

    #[error("inner solver did not converge within {iterations} iterations (residual {residual:.3e})")]
    InnerNonConvergence { iterations: usize, residual: f64 },

    #[error("starting point is not in the constraint set")]
    Infeasible,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
