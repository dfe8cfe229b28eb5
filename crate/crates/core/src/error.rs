use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration violates its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The recursion produced a non-finite value.
    #[error("non-finite value at step k={k} (agent j={agent})")]
    Overflow { k: u64, agent: usize },

    /// The generic recursion or its auxiliary function misbehaved.
    #[error("riccati spec error at step k={k}: {msg}")]
    Spec { k: u64, msg: String },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("no growth: bounded sequence")]
    NoGrowth,
}

pub type Result<T> = std::result::Result<T, Error>;
