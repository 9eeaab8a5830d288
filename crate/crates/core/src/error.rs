use thiserror::Error;

/// Errors surfaced by the series kernel and the engines built on it.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    /// Two series built over different variable orders were combined.
    #[error("variable order mismatch: {0}")]
    OrderMismatch(String),

    /// Caller misuse that is detectable at the API boundary
    /// (out-of-order residues, bad ranks, non-coprime input, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// The input lies outside the mathematical domain of the operation
    /// (exp of a pole, binomial series of a non-perturbation, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Inversion requested for a series without an invertible leading term.
    #[error("singular input: {0}")]
    Singular(String),

    /// A coefficient was requested outside the exactness window of a series.
    /// The caller must recompute with larger caps.
    #[error("cap violation: monomial {monomial} exceeds cap {cap} in variable {var}")]
    CapViolation {
        var: String,
        monomial: i32,
        cap: i32,
    },

    /// Internal invariant failure (exponent overflow, runaway expansion).
    #[error("internal error: {0}")]
    Internal(String),

    /// A pairing failed its mandatory cap-stability check even after the
    /// automatic cap retry.
    #[error("result did not stabilise under cap enlargement: {0}")]
    Unstable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
