use thiserror::Error;

/// Errors raised anywhere in the sensing toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A floating-point evaluation drifted further than rounding can explain,
    /// or an iterative method failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Detector state was not ready for the requested operation.
    #[error("state error: {0}")]
    State(String),

    /// A run finished without any counted events for one hypothesis.
    #[error("insufficient data: {n_h0} H0 events and {n_h1} H1 events counted; raise the event count or adjust the duty cycle")]
    InsufficientData { n_h0: u64, n_h1: u64 },

    /// MRC weights cannot be normalized.
    #[error("degenerate MRC weights: all per-CR SNRs are zero")]
    DegenerateWeights,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
