//! Error type shared by the whole crate.

use thiserror::Error;

/// Everything that can go wrong while building operators, applying channels
/// or running verification routines.
#[derive(Debug, Clone, Error)]
pub enum GchanError {
    /// Fock cutoff too small for the requested construction.
    #[error("invalid cutoff d = {given}: {reason}")]
    InvalidCutoff { given: usize, reason: String },

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Truncation leaks more weight than the configured ceiling allows.
    #[error(
        "truncation leakage {leakage:.3e} exceeds ceiling {ceiling:.3e}; \
         increase the cutoff (try d = {suggested_cutoff})"
    )]
    TruncationLeakage {
        leakage: f64,
        ceiling: f64,
        suggested_cutoff: usize,
    },

    /// A state cannot be represented at the requested cutoff.
    #[error(
        "cutoff d = {given} too small: tail mass {tail:.3e} above tolerance {tolerance:.3e}; \
         required cutoff is about d = {required}"
    )]
    CutoffTooSmall {
        given: usize,
        required: usize,
        tail: f64,
        tolerance: f64,
    },

    /// An operator that must be Hermitian is not, beyond tolerance.
    #[error("operator not Hermitian: max |M - M\u{2020}| = {deviation:.3e} (tolerance {tolerance:.3e})")]
    NonHermitian { deviation: f64, tolerance: f64 },

    /// A density matrix has an eigenvalue below the negativity threshold.
    #[error("density matrix has negative eigenvalue {value:.3e} (threshold {threshold:.3e})")]
    NegativeEigenvalue { value: f64, threshold: f64 },

    /// A pure state is not normalized.
    #[error("state norm {norm} deviates from 1 beyond {tolerance:.3e}")]
    NotNormalized { norm: f64, tolerance: f64 },

    /// Requested matrix would exceed the configured size ceiling.
    #[error("matrix dimension {size} exceeds the size ceiling {ceiling}")]
    SizeCeiling { size: usize, ceiling: usize },

    /// Mode indices passed to a multi-mode operation are invalid.
    #[error("invalid mode set: {0}")]
    InvalidModes(String),

    /// Two evaluation routes that must agree do not.
    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),

    /// A quadrature grid failed its normalization check.
    #[error("quadrature grid not normalized: weight sum {sum} (tolerance {tolerance:.3e})")]
    UnnormalizedGrid { sum: f64, tolerance: f64 },

    /// A quadrature did not converge within the node budget.
    #[error("quadrature did not converge: residual {residual:.3e} after {nodes} radial nodes")]
    QuadratureNotConverged { residual: f64, nodes: usize },

    /// The requested channel variant is not supported by this operation.
    #[error("channel variant {variant} not supported by {operation}")]
    UnsupportedChannel {
        variant: &'static str,
        operation: &'static str,
    },

    /// Cutoffs or mode counts of two operands do not match.
    #[error("incompatible operands: {0}")]
    IncompatibleOperands(String),
}

pub type Result<T> = std::result::Result<T, GchanError>;
