use thiserror::Error;

pub type Result<T> = std::result::Result<T, QpsError>;

#[derive(Debug, Error)]
pub enum QpsError {
    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix [[{0}, {1}], [{2}, {3}]] is not unimodular (det = {4})")]
    NotUnimodular(i64, i64, i64, i64, i64),

    #[error("({0}, {1}) are not coprime; no unimodular completion exists")]
    NotCoprime(i64, i64),

    #[error("doubled coordinate ({dq}, {dp}) outside [0, {bound})")]
    PointOutOfRange { dq: i64, dp: i64, bound: i64 },

    #[error("the Leonhardt family requires an even dimension, got {0}")]
    LeonhardtOddDimension(usize),

    #[error("the Cohendet reduction is only defined for odd dimensions, got {0}")]
    ReductionEvenDimension(usize),

    #[error("phase choice (n+ = {n_plus}, n- = {n_minus}) at N = {dim} admits no marginal Fano operator")]
    Inadmissible { n_plus: i64, n_minus: i64, dim: usize },

    #[error("phase choice (n+ = {n_plus}, n- = {n_minus}) does not belong to the {family} family")]
    FamilyMismatch {
        n_plus: i64,
        n_minus: i64,
        family: &'static str,
    },

    #[error(
        "intertwiner for h = {h} is not unique: singular-value gap {gap:.3e} below {required:.1e}"
    )]
    RepresentationFailure { h: String, gap: f64, required: f64 },

    #[error("unitarized intertwiner for h = {h} has residual {residual:.3e}")]
    NumericalFailure { h: String, residual: f64 },

    #[error(
        "projective composition law U(h')U(h) ∝ U(h'h) violated: residual {residual:.3e}"
    )]
    ProjectivityViolation { residual: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("malformed state document: {0}")]
    MalformedDocument(String),

    #[error("moment index ({a}, {b}) outside [0, {dim})")]
    MomentIndex { a: i64, b: i64, dim: usize },

    #[error("{0}")]
    Inconsistent(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
