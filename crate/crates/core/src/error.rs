use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid subshift: {0}")]
    InvalidShift(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("transition matrix is not primitive within the search bound {bound}")]
    NotMixing { bound: usize },

    #[error("depth {depth} exceeds the cap of {cap}")]
    DepthCap { depth: usize, cap: usize },

    #[error("horizon {horizon} exceeds the exact-enumeration cap of {cap}")]
    HorizonCap { horizon: usize, cap: usize },

    #[error("potential needs cylinder depth {needed} but discretization depth is {depth}")]
    NonAdmissiblePotential { needed: usize, depth: usize },

    #[error("perturbation |eps| = {eps} does not preserve uniform expansion (needs |eps| < 2)")]
    ExpansionViolation { eps: f64 },

    #[error("y = {y} is outside the image of branch {branch}")]
    OutOfImage { branch: usize, y: f64 },

    #[error("iteration did not converge within {max_iter} steps (last residual {residual:e})")]
    NoConvergence { max_iter: usize, residual: f64 },

    #[error("input is not convex: second divided difference {value:e} at index {index}")]
    NonConvexInput { index: usize, value: f64 },

    #[error("value {value} is outside the admissible range ({lo}, {hi})")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("points are not in a common depth-{depth} cylinder")]
    CylinderMismatch { depth: usize },

    #[error("{missing} depth-{depth} cylinders never visited by the orbit")]
    CoverageFailure { depth: usize, missing: usize },

    #[error("potential has a non-vanishing periodic obstruction (max |S_n phi|/n = {max_mean:e})")]
    ObstructedInput { max_mean: f64 },

    #[error("transition matrix is not symmetric; time reversal would break admissibility")]
    AdmissibilityMismatch,

    #[error("histogram bin pair at |A| = {a} has only {count} samples (need 25)")]
    InsufficientSamples { a: f64, count: u64 },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of an iterative method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NotMixing { .. }
                | Error::CoverageFailure { .. }
                | Error::InsufficientSamples { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
