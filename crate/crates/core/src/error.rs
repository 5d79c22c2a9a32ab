//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the numerical kernels and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-contract input (non-finite entries, dimension
    /// mismatch, violated precondition).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A trajectory left the representable range; carries the time of blow-up.
    #[error("divergence at t = {time}: {message}")]
    Divergence { time: f64, message: String },

    /// A desk-scale resource cap was exceeded (e.g. dense particle Jacobians).
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// Result not representable (overflow in matrix exponential, tangent pole
    /// in the index bound).
    #[error("range error: {0}")]
    Range(String),

    /// Two coupled flows were asked to share data on mismatched grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A point hit the cut locus where the geometric primitive is undefined.
    #[error("cut locus: {0}")]
    CutLocus(String),

    /// Experiment configuration error (unknown key, missing value, bad type).
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
