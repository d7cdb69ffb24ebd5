use thiserror::Error;

/// Errors raised by the geometry engine.
///
/// Numeric payloads are stored as `f64` regardless of the scalar type the
/// computation ran in, so the error type stays non-generic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("variable index {index} out of range for dimension {dimension}")]
    Index { index: usize, dimension: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate Lagrangian: reciprocal condition number {rcond:e} below {tolerance:e}")]
    DegenerateLagrangian { rcond: f64, tolerance: f64 },

    #[error("singular Jacobian: |det| = {det:e}")]
    SingularJacobian { det: f64 },

    #[error("singular metric: reciprocal condition number {rcond:e}")]
    SingularMetric { rcond: f64 },

    #[error("integration failed at t = {t}: {message}")]
    Step { t: f64, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
