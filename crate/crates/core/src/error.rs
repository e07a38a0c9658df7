use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("quadrature did not converge: estimate {value:e}, error {error:e} after {subdivisions} subdivisions")]
    QuadratureFailure {
        value: f64,
        error: f64,
        subdivisions: usize,
    },
    #[error("nonphysical parameter: {0}")]
    NonphysicalParameter(String),
    #[error("inconsistent pulse area: {0}")]
    InconsistentArea(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("singular Gram matrix")]
    SingularGram,
    #[error("optimization failed: {0}")]
    OptimizationFailure(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
