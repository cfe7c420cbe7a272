use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the numerics can report. Variants are named after the
/// condition that was violated, not after the operation that noticed it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("generator is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("generator row {row} sums to {sum:e}, expected 0")]
    NonConservative { row: usize, sum: f64 },
    #[error("negative rate {rate} from state {from} to state {to}")]
    NegativeRate { from: usize, to: usize, rate: f64 },
    #[error("chain is reducible: {reason}")]
    Reducible { reason: String },
    #[error("alpha = {alpha} is outside [0, 1]")]
    AlphaOutOfRange { alpha: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("polynomial degree {degree} exceeds the cap {cap}")]
    DegreeTooHigh { degree: usize, cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("propagator refinement disagreement {estimate:e} exceeds {tolerance:e}")]
    OdeToleranceFailure { estimate: f64, tolerance: f64 },
    #[error("dominant eigenvalue not separated: relative gap {relative_gap:e} < {required:e}")]
    GapTooSmall { relative_gap: f64, required: f64 },
    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("singular linear system (pivot {pivot})")]
    SingularSystem { pivot: usize },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("absorbing state {state} reached")]
    AbsorbingState { state: usize },
    #[error("path horizon {path} does not cover the requested horizon {requested}")]
    HorizonMismatch { path: f64, requested: f64 },
}
