use thiserror::Error;

/// Errors raised by the model, the surrogate builders and the optimizers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("rank deficiency: numerical rank {rank} below required {required}")]
    RankDeficient { rank: usize, required: usize },
    #[error("receiver undefined: forwarded signal is zero")]
    ZeroSignal,
    #[error("value outside the domain: {0}")]
    Domain(String),
    #[error("surrogate domain violated: {0}")]
    SurrogateDomain(String),
    #[error("no feasible initial point after {iterations} iterations (best t = {best_t:.3e})")]
    Infeasible { iterations: usize, best_t: f64 },
    #[error("conic backend failed: {0}")]
    Backend(String),
    #[error("monotonicity violated at step {step}: {before:.12e} -> {after:.12e}")]
    NonMonotone { step: String, before: f64, after: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
