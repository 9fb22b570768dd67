use thiserror::Error;

/// Errors raised by construction, transformation, reduction and simulation.
///
/// Verification results are never reported through this type: structure and
/// energy checks return report structs with pass/fail flags instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhdaeError {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: String,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("a matrix function needs at least one coefficient matrix")]
    EmptyCoefficients,

    #[error("invalid time interval [{t0}, {tf}]: t0 must be strictly less than tf")]
    InvalidInterval { t0: f64, tf: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{what} is numerically singular (smallest singular value {sigma_min:.3e}{at})")]
    Singular {
        what: String,
        sigma_min: f64,
        at: String,
    },

    #[error("polynomial re-fit of {what} left residual {residual:.3e} above tolerance {tol:.3e}")]
    FitResidual { what: String, residual: f64, tol: f64 },

    #[error("operator pair is not skew-adjoint (residual {residual:.3e})")]
    NotSkewAdjoint { residual: f64 },

    #[error("{0} requires constant coefficients; the system is time-varying")]
    NotConstant(String),

    #[error("rank of E changes over the interval ({first} at t={t_first}, {other} at t={t_other})")]
    RankChange {
        first: usize,
        t_first: f64,
        other: usize,
        t_other: f64,
    },

    #[error("system has differentiation index greater than one; regularize it first")]
    HighIndex,

    #[error("inconsistent initial state: algebraic residual {residual:.3e} exceeds {tol:.3e}")]
    Inconsistent { residual: f64, tol: f64 },

    #[error("rank assumption violated for {what}: {detail} (singular values {singular_values:?})")]
    RankAssumption {
        what: String,
        detail: String,
        singular_values: Vec<f64>,
    },

    #[error("structure violated: {0}")]
    Structure(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, PhdaeError>;
