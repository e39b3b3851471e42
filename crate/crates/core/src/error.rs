//! Crate-wide error type.

use thiserror::Error;

/// Diagnostics attached to an integral precondition failure (the `a << b`
/// gate of generalized integrals).
#[derive(Debug, Clone)]
pub struct IntegralDiagnostics {
    /// Raw per-grid integral values computed despite the failed gate.
    pub raw_integrals: Vec<(i32, f64)>,
    /// A sampled interior value of the integrand, if one is nonzero.
    pub interior_sample: Option<(i32, f64, f64)>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("dimension mismatch: `{what}` needs dimension {needed}, ambient dimension is {ambient}")]
    DimensionMismatch {
        what: String,
        needed: usize,
        ambient: usize,
    },

    #[error("evaluation error: {reason} in `{subexpr}` at x={point:?}, eps={eps}")]
    Eval {
        reason: String,
        subexpr: String,
        point: Vec<f64>,
        eps: f64,
    },

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("grid mismatch between tabulated operands")]
    GridMismatch,

    #[error("insufficient data for order fit: {0} nonzero tail samples (need at least 4)")]
    InsufficientData(usize),

    #[error("precondition violated: {reason}")]
    PreconditionViolated {
        reason: String,
        diagnostics: Option<IntegralDiagnostics>,
    },

    #[error("c-boundedness violation at eps={eps}: image point {point:?} leaves the admissible compact")]
    CBoundedness { eps: f64, point: Vec<f64> },

    #[error("ill-conditioned coefficient system: condition estimate {cond:.3e} exceeds {limit:.1e}")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("unsupported distribution kind: {0}")]
    UnsupportedKind(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {err:.3e})")]
    QuadratureNonConvergent { a: f64, b: f64, err: f64 },

    #[error("cache file error: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;
