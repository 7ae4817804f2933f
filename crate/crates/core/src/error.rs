use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates one of its invariants.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A shifted or transported quantity left the lattice it is sampled on.
    #[error("aliasing: {0}")]
    Aliasing(String),

    #[error("representation mismatch: expected {expected}, got {got}")]
    RepresentationMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("numerical instability at step {step} (t = {time:.6e}): {detail}")]
    Instability {
        step: usize,
        time: f64,
        detail: String,
    },

    #[error("fit failure: {0}")]
    FitFailure(String),

    /// No separation survived the quadratic-model gate; the packet is in the
    /// complete-momentum-decoherence regime.
    #[error("fit region empty: {0}")]
    FitRegionEmpty(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
