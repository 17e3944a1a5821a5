//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong between parsing a plant and reporting
/// `gamma*`.
#[derive(Debug, Clone, Error)]
pub enum HinfError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(String),
    #[error("resolvent (sI - A) is singular at s = {re}{im:+}i")]
    SingularResolvent { re: f64, im: f64 },
    #[error("degenerate realization: both (b; d) and (c; d) vanish")]
    DegenerateRealization,
    #[error("channel {0} has an identically zero transfer function")]
    IdenticallyZeroChannel(&'static str),
    #[error("null-vector extraction failed: residual {residual:.3e} exceeds {limit:.3e}")]
    NullspaceExtractionFailure { residual: f64, limit: f64 },
    #[error("matrix is not Hurwitz (eigenvalue with real part {0:.3e})")]
    NotHurwitz(f64),
    #[error("ill-conditioned problem: {0}")]
    IllConditioned(String),
    #[error("Sylvester spectra overlap: min separation {0:.3e}")]
    SpectraOverlap(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPd(f64),
    #[error("(A, b2) is not stabilizable")]
    NotStabilizable,
    #[error("(A, c2) is not detectable")]
    NotDetectable,
    #[error("null vector degenerate: |f| = {0:.3e} below threshold")]
    NullVectorDegenerate(f64),
    #[error("unsupported structure: {0}")]
    Unsupported(String),
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),
    #[error("solved dual violates the expected zero pattern: {0}")]
    StructureMismatch(String),
    #[error("matrix completion hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("oracle inconclusive: {0}")]
    OracleInconclusive(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("SDP solver failed: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, HinfError>;
