//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by basis, grid, operator, summation, and simulation code.
#[derive(Debug, Error)]
pub enum PbError {
    /// A caller-supplied value is outside the documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A caller-supplied floating-point value is NaN or infinite.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// Quadrature order is too small to integrate against the requested index.
    #[error("quadrature order {order} too small for basis index {n}; need at least {needed}")]
    QuadratureOrder {
        order: usize,
        n: usize,
        needed: usize,
    },

    /// An operator word needs more guard band than the grid has left.
    #[error(
        "guard band exhausted: word length {needed} exceeds remaining guard {available} \
         (trusted {trusted}, stored side {side})"
    )]
    GuardExhausted {
        needed: usize,
        available: usize,
        trusted: usize,
        side: usize,
    },

    /// No implemented summation method certifies a value for the series.
    #[error("not summable by implemented methods: {0}")]
    NotSummable(String),

    /// The trusted region provides too few shell terms to classify the tail.
    #[error("insufficient truncation: largest usable shell {largest_shell}: {0}", .detail)]
    InsufficientTruncation {
        largest_shell: usize,
        detail: String,
    },

    /// Two summation routes that must agree did not.
    #[error("summation routes disagree: {0}")]
    SummationInconsistent(String),

    /// A parameter set violates a documented constraint.
    #[error("parameter constraint violated: {0}")]
    Constraint(String),

    /// The parameters are valid input but outside the implemented regime.
    #[error("outside implemented regime: {0}")]
    OutsideRegime(String),

    /// Time integration left the finite-float domain.
    #[error("integration produced a non-finite state at step {step}")]
    NonFiniteState { step: usize },

    /// A grid document failed to (de)serialize.
    #[error("serialization: {0}")]
    Serialization(String),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, PbError>;
