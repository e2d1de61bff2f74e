//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by kernel, operator and decision routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A numeric parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An evaluation point left the open unit disk (or the safe margin of it).
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// A truncation is too short to certify the requested quantity.
    #[error("truncation insufficient: {0}")]
    TruncationInsufficient(String),

    /// The zero symbol was passed where a nonzero one is required.
    #[error("degenerate symbol: {0}")]
    DegenerateSymbol(String),

    /// The operation is not defined for this input kind.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A resolvent or witness is too ill-conditioned to trust.
    #[error("near singular: {0}")]
    NearSingular(String),

    /// A frame lost pointwise linear independence.
    #[error("singular frame: {0}")]
    SingularFrame(String),

    /// Build-time verification of a block operator failed.
    #[error("construction rejected at block {block}: {reason}")]
    ConstructionRejected { block: usize, reason: String },

    /// A matrix violates a required triangular structure.
    #[error("structure violation: {0}")]
    StructureViolation(String),

    /// A dense solve would exceed the configured dimension cap.
    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    /// A documented precondition of the routine does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A similarity witness fails its own validity checks.
    #[error("invalid witness: {0}")]
    InvalidWitness(String),

    /// Inputs are outside the parameter range the decision procedure covers.
    #[error("out of scope parameters: {0}")]
    OutOfScopeParameters(String),

    /// A search produced no admissible candidate.
    #[error("not found: {0}")]
    NotFound(String),
}

pub type Result<T> = std::result::Result<T, Error>;
