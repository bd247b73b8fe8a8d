use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("packing infeasible: k*(delta/2)^d = {needed} exceeds (radius+delta/2)^d = {available}")]
    PackingInfeasible { needed: f64, available: f64 },

    #[error("rejection sampler exceeded {cap} proposals")]
    RetryCapExceeded { cap: u64 },

    #[error("sample budget exceeded: {required:.3e} samples required, cap {cap}")]
    SampleBudgetExceeded { required: f64, cap: u64 },

    #[error("candidate budget exceeded: {required} candidates required, cap {cap}")]
    CandidateBudgetExceeded { required: u64, cap: u64 },

    #[error("insufficient samples: {needed} requested, {available} available")]
    InsufficientSamples { needed: u64, available: u64 },

    #[error("per-term magnitude overflows f64 (log magnitude {log_magnitude:.1})")]
    Overflow { log_magnitude: f64 },

    #[error("characteristic function modulus underflows at M = {m}")]
    ModulusUnderflow { m: f64 },

    #[error("cluster count mismatch: found {found}, expected {expected}")]
    ClusterCountMismatch { found: usize, expected: usize },

    #[error("search exhausted: best objective {best:.3e} after {starts} starts")]
    SearchExhausted { best: f64, starts: usize },

    #[error("quadrature did not converge: error estimate {estimate:.3e}")]
    Quadrature { estimate: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown family: {0}")]
    UnknownFamily(String),
}

pub type Result<T> = std::result::Result<T, Error>;
