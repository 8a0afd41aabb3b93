//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CknError>;

#[derive(Debug, Error)]
pub enum CknError {
    /// Input outside the mathematical domain (wedge violations, non-positive
    /// densities, exponents out of range, …).
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally incompatible inputs (mismatched grid shapes, wrong
    /// manifold for an operation, …).
    #[error("shape error: {0}")]
    Shape(String),

    /// An iterative solver failed to converge or to bracket a root.
    #[error("solver error: {0}")]
    Solver(String),

    /// Resolution insufficient for the requested computation (Richardson
    /// ratio out of range, overflow of measure weights, …).
    #[error("resolution error: {0}")]
    Resolution(String),

    /// A scientific gate was violated (e.g. Fisher information increased
    /// along a flow in the regime where it must not).
    #[error("gate violated: {0}")]
    Gate(String),

    /// Reading or writing grid data failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CknError {
    pub fn domain(msg: impl Into<String>) -> Self {
        CknError::Domain(msg.into())
    }
    pub fn shape(msg: impl Into<String>) -> Self {
        CknError::Shape(msg.into())
    }
    pub fn solver(msg: impl Into<String>) -> Self {
        CknError::Solver(msg.into())
    }
    pub fn resolution(msg: impl Into<String>) -> Self {
        CknError::Resolution(msg.into())
    }
    pub fn gate(msg: impl Into<String>) -> Self {
        CknError::Gate(msg.into())
    }
}
