use thiserror::Error;

use crate::ifs::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point {x} lies outside the interval [{lo}, {hi}]")]
    OutsideInterval { x: f64, lo: f64, hi: f64 },

    #[error("IFS failed validation:\n{0}")]
    Validation(Box<ValidationReport>),

    #[error(
        "resolution violated at frequency {frequency}: depth {depth} is too shallow, \
         minimal admissible depth is {min_depth}"
    )]
    Resolution {
        frequency: f64,
        depth: usize,
        min_depth: usize,
    },

    #[error("operation needs affine maps only: {0}")]
    NonAffine(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("word of length {len} is too short: {reason}")]
    WordTooShort { len: usize, reason: String },

    #[error("cylinder depth mismatch: operator depth {expected}, function depth {found}")]
    DepthMismatch { expected: usize, found: usize },

    #[error("empty partition cell {0}")]
    EmptyCell(String),

    #[error("decay unresolvable at this N: {0}")]
    Unresolvable(String),

    #[error("C6 calibration failed after {0} doublings")]
    Calibration(usize),

    #[error("power iteration did not converge within {0} iterations")]
    NonConvergence(usize),

    #[error("estimated norm {norm} exceeds 1 at theta = {theta}")]
    NormExceeded { theta: f64, norm: f64 },

    #[error("{0}")]
    Precondition(String),

    #[error("too few points for a fit: {found} (need {needed})")]
    TooFewPoints { found: usize, needed: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
