use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("target {target} is not bracketed: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NotBracketed { target: f64, f_lo: f64, f_hi: f64 },

    #[error("non-finite value in the data")]
    NonFiniteData,

    #[error("non-finite parameter after stochastic approximation iteration {iteration}")]
    NonFiniteParameter { iteration: usize },

    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("regressor matrix is rank deficient")]
    RankDeficient,

    #[error("unit-diagonal constraint not met; final diagonal {diagonal:?}")]
    ConstraintNotMet { diagonal: Vec<f64> },

    #[error("quadrature did not converge (last two estimates {previous} and {current})")]
    QuadratureNotConverged { previous: f64, current: f64 },

    #[error("fixed-point iteration diverged at sweep {sweep}")]
    Diverged { sweep: usize },

    #[error("no candidate model could be fitted")]
    NoCandidate,

    #[error("{0}")]
    Unsupported(&'static str),
}
