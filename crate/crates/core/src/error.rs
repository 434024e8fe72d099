use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// The fractional spectrum fails the trace-class gate `delta < 1 - 1/(2*sigma)`.
    #[error(
        "trace-class gate violated: need delta < 1 - 1/(2*sigma) = {bound} \
         (got sigma = {sigma}, delta = {delta})"
    )]
    TraceClassGate { sigma: f64, delta: f64, bound: f64 },

    /// The zero frequency is part of the truncation, so the smallest eigenvalue
    /// would be `omega`; a strictly positive shift is required.
    #[error("omega = 0 with the zero frequency included: the smallest eigenvalue must be strictly positive, set omega > 0")]
    ZeroFrequencyShift,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A state field stopped being finite during time stepping.
    #[error("non-finite field encountered at step {step}")]
    NonFinite { step: usize },

    /// A path handed to an initial-value-anchored functional does not start at x0.
    #[error(
        "initial condition mismatch: |path(0) - x0| = {deviation:e} exceeds tolerance {tol:e}"
    )]
    InitialCondition { deviation: f64, tol: f64 },

    #[error("eps must be strictly positive for this operation")]
    EpsNotPositive,

    /// The requested drift cannot provide the Jacobian action needed for gradients.
    #[error("gradient unavailable for this drift: {0}")]
    GradientUnsupported(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// The smoothing ratio is undefined for the zero field.
    #[error("zero input field")]
    ZeroField,
}

pub type Result<T> = std::result::Result<T, Error>;
