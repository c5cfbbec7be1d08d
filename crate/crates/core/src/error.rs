use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(&'static str),
    #[error("site {site} out of range 1..={n}")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("Hermitian eigensolver did not converge")]
    EigenFailure,
    #[error("QR retraction hit a singular matrix")]
    SingularRetraction,
    #[error("invalid qubit targets")]
    InvalidTargets,
    #[error("conditioning event has probability {0:e}; cannot condition on it")]
    DegenerateConditioning(f64),
    #[error("probe site j = {j} must satisfy 2 <= j <= n = {n}")]
    InvalidProbe { j: usize, n: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("F_EPR must be positive, got {0}")]
    NonPositiveFidelity(f64),
    #[error("empty series")]
    EmptySeries,
    #[error("threshold already exceeded at the first grid time {0}; crossing not resolvable")]
    CrossingBeforeGrid(f64),
    #[error("need at least two reached spreading points, got {0}")]
    TooFewPoints(usize),
}
