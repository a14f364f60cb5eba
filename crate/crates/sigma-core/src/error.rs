use thiserror::Error;

/// Failures of the exact arithmetic layer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("division by zero")]
    DivisionByZero,
    /// Substitution made the denominator identically zero; callers retry elsewhere.
    #[error("pole hit")]
    PoleHit,
}
