use thiserror::Error;

/// Errors raised by the linear algebra, channel, renewal and engine layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),
    #[error("inconsistent layout: {0}")]
    InconsistentLayout(String),
    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not unitary (deviation {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("eigensolver failed to converge")]
    NoConvergence,
    #[error("matrix is singular")]
    Singular,
    #[error("channel `{0}` is not trace preserving")]
    NotTracePreserving(String),
    #[error("time {t} outside hazard domain [0, {max}]")]
    OutOfDomain { t: f64, max: f64 },
    #[error("invalid hazard: {0}")]
    InvalidHazard(String),
    #[error("engine requires a constant hazard")]
    NonConstantHazard,
    #[error("branch count {count} exceeds cap {cap}")]
    BranchCap { count: usize, cap: usize },
    #[error("composite dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
