use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("frames live in different symplectic spaces")]
    SpaceMismatch,

    #[error("not a Lagrangian subspace: {0}")]
    NotLagrangian(String),

    #[error("not transverse: {0}")]
    NotTransverse(String),

    #[error("Lagrangian outside the chart domain (meets the complement in dimension {0})")]
    NotInChartDomain(usize),

    #[error("subspace P is not contained in the chart complement (residual {0:e})")]
    NotInComplement(f64),

    #[error("retry budget exhausted: {0}")]
    RetryExhausted(String),

    #[error("refinement budget exhausted: {0}")]
    RefinementExhausted(String),

    #[error("degenerate crossing at t = {t}: restricted derivative form is singular")]
    DegenerateCrossing { t: f64 },

    #[error("symplectic drift {drift:e} exceeds bound {bound:e} at t = {t}; use a smaller step")]
    DriftExceeded { t: f64, drift: f64, bound: f64 },

    #[error("flow matrix singular at t = {0}")]
    SingularFlow(f64),

    #[error("degenerate metric restriction: {0}")]
    DegenerateRestriction(String),

    #[error("degenerate event at t = {0}: closed-form ledger unavailable")]
    DegenerateEvent(f64),

    #[error("curvature operator is not g-symmetric: {0}")]
    NotMetricSymmetric(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}
