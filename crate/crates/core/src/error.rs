use alloc::string::String;

/// Errors raised by the numerical and simulation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("interval out of order: {t0} > {t1}")]
    Ordering { t0: f64, t1: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("value {value} outside of the admissible range [{low}, {high}]")]
    OutOfRange { value: f64, low: f64, high: f64 },
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("quadrature did not converge (estimate {estimate}, error {error})")]
    Integration { estimate: f64, error: f64 },
    #[error("more than {max_jumps} jumps before the horizon")]
    Explosion { max_jumps: usize },
    #[error("tree exceeds {max_nodes} individuals")]
    TreeTooLarge { max_nodes: usize },
    #[error("no convergence after {sweeps} sweeps (last sup-change {change:e})")]
    Convergence { sweeps: usize, change: f64 },
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("degenerate lower barrier: S_T({level}) = 0")]
    DegenerateBarrier { level: f64 },
    #[error("degenerate conditioning: harmonic function vanishes at {level}")]
    DegenerateConditioning { level: f64 },
    #[error("regime mismatch: {0}")]
    Regime(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
