use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("component {component} out of range for dimension {n}")]
    ComponentOutOfRange { component: usize, n: usize },

    #[error("invalid vector field: {0}")]
    InvalidField(String),

    #[error("jacobian not diagonal: {0}")]
    JacobianNotDiagonal(String),

    #[error("operation requires a polynomial vector field")]
    NotPolynomial,

    #[error("change of basis matrix is singular")]
    SingularMatrix,

    #[error("composition with an analytic tail envelope is not supported")]
    TailComposition,

    #[error("point outside the closed polydisc of radius {radius}")]
    OutsideDomain { radius: f64 },

    #[error("tail bound diverges: component {component} has r·radius = {ratio} >= 1")]
    DivergentTail { component: usize, ratio: f64 },

    #[error("requested radius {rho} must be below the domain radius {mu}")]
    RadiusExceedsDomain { rho: f64, mu: f64 },

    #[error("invalid weight scheme: {0}")]
    InvalidScheme(String),

    #[error("matrix is not upper triangular")]
    NotTriangular,

    #[error("inconsistent certificate: {0}")]
    InconsistentCertificate(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
