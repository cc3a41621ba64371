//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by model construction, reduction, simulation, and the
/// detection pipeline.
#[derive(Debug, Error)]
pub enum SwingError {
    /// A scenario or configuration value is out of range or inconsistent.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The bus-partition block of the augmented admittance matrix could not
    /// be factorized, so the network cannot be reduced to machine nodes.
    #[error("singular bus admittance block: {0}")]
    SingularNetwork(String),

    /// A numeric routine failed to converge (power-flow style Newton
    /// iterations, equilibrium search, root bracketing).
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// An event sequence is malformed (out of order, beyond the horizon,
    /// referencing unknown elements).
    #[error("invalid event: {0}")]
    InvalidEvent(String),

    /// File or serialization failure at an external boundary.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON scenario/config parse failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// CSV read/write failure at an external boundary.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, SwingError>;
