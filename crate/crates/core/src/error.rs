use thiserror::Error;

/// Failures reported by the numerical routines.
///
/// Payload values are converted to `f64` so the error type does not depend on
/// the scalar type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite entry encountered")]
    NonFinite,

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("{what} did not converge (best residual {residual:e})")]
    NoConvergence { what: &'static str, residual: f64 },

    #[error("resonance: lambda minus eigenvalue difference ({re}, {im}) is {distance:e} < margin {margin:e}")]
    Resonance { re: f64, im: f64, distance: f64, margin: f64 },

    #[error("matrix exponential overflow (norm {norm:e})")]
    Overflow { norm: f64 },

    #[error("branched base must be nonzero")]
    ZeroBase,

    #[error("eigenvalue ({re}, {im}) of the target lies outside the schlicht region")]
    BranchAmbiguity { re: f64, im: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("point coincides with pole {pole} (distance {distance:e})")]
    AtPole { pole: usize, distance: f64 },

    #[error("residues do not sum to zero (residual {residual:e})")]
    ZeroSumViolated { residual: f64 },

    #[error("path segment {segment} passes within {distance:e} of pole {pole} (clearance {required:e})")]
    PathTooClose { segment: usize, pole: usize, distance: f64, required: f64 },

    #[error("step size underflow at parameter {at:e}{hint}")]
    StepUnderflow { at: f64, hint: &'static str },

    #[error("loop clearance infeasible: {0}")]
    ClearanceInfeasible(String),

    #[error("certified tail bound does not close (d = {d:e}); achievable radius {achievable_radius:e}")]
    TailBound { d: f64, achievable_radius: f64 },

    #[error("point at distance {distance:e} is outside the certified radius {radius:e}")]
    OutsideCertifiedRadius { distance: f64, radius: f64 },

    #[error("pole loci come within {distance:e} of a collision (floor {floor:e}); the path may approach the tau-divisor")]
    NearCollision { distance: f64, floor: f64 },

    #[error("pole {pole} crosses generator loop {loop_index}")]
    LoopCrossing { pole: usize, loop_index: usize },

    #[error("logarithmic derivative has a pole of order {order} at pole {pole} (coefficient {magnitude:e})")]
    NonFuchsian { pole: usize, order: usize, magnitude: f64 },

    #[error("invalid principal factor: {0}")]
    InvalidFactor(String),

    #[error("local factorization failed at pole {pole}: {reason}")]
    FactorizationFailed { pole: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
