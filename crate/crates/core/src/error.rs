use thiserror::Error;

/// Errors raised by the estimation pipeline and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DoaError {
    #[error("invalid coprime geometry (m={m}, n={n}): {reason}")]
    InvalidGeometry { m: usize, n: usize, reason: String },

    #[error("invalid source scenario: {0}")]
    InvalidScenario(String),

    #[error("source count {d} must satisfy 1 <= D < {len}")]
    SourceCount { d: usize, len: usize },

    #[error("covariance is not Hermitian (relative asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("subspace collapse: noise power estimate reaches every signal eigenvalue")]
    SubspaceCollapse,

    #[error("polynomial degree deficiency: |b0| = {lead:e} with |b| = {norm:e}")]
    DegreeDeficient { lead: f64, norm: f64 },

    #[error("root finding did not converge for a degree-{0} polynomial")]
    RootFinding(usize),

    #[error("residue {value} lies outside the fundamental interval [{lo}, {hi})")]
    OutsideFundamental { value: f64, lo: f64, hi: f64 },

    #[error("alias pair (k={k}, l={l}) does not lie on any segment")]
    InconsistentLifts { k: usize, l: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("steering matrix is singular (coincident sources)")]
    SingularSteering,

    #[error("estimation failure: {0}")]
    EstimationFailure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, DoaError>;
