//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Instance validation failed; each entry is one violation.
    #[error("invalid instance: {}", .0.join("; "))]
    InvalidInstance(Vec<String>),

    #[error("empty window")]
    EmptyWindow,

    #[error("empty estimation window")]
    EmptyEstimationWindow,

    #[error("{0}")]
    Precondition(String),

    /// The two-stage mechanism contract requires warm-up samples for every
    /// (arm, public type) pair before the state estimate is frozen.
    #[error("no warm-up samples for (arm {arm}, public type {public})")]
    MissingWarmupSamples { arm: usize, public: usize },

    #[error("adversary exhausted at round {0}")]
    AdversaryExhausted(usize),

    #[error("recorded sampling probability is zero for chosen arm {arm} in round {round}")]
    ZeroPropensity { arm: usize, round: usize },

    #[error("benchmark is infinite")]
    InfiniteBenchmark,

    #[error("LP solver failure: {0}")]
    Solver(String),

    #[error("convex solver did not converge after {iterations} iterations (bounds {lower}..{upper})")]
    NoConvergence { iterations: usize, lower: f64, upper: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("instance file: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInstance(vec![msg.into()])
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
