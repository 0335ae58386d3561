use thiserror::Error;

pub type Result<T, E = FrameError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("operator must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("operator has {expected} entries declared but {actual} supplied")]
    EntryCount { expected: usize, actual: usize },

    #[error("operator contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("tolerance `{name}` must be strictly positive and finite, got {value}")]
    InvalidTolerance { name: &'static str, value: f64 },

    #[error("skew-Hermitian part {residual:e} exceeds allowed {limit:e}")]
    SkewPart { residual: f64, limit: f64 },

    #[error("operator has a materially negative eigenvalue {lambda_min:e} (limit {limit:e})")]
    NegativeEigenvalue { lambda_min: f64, limit: f64 },

    #[error("reference operator is numerically zero (norm {norm:e})")]
    ZeroOperator { norm: f64 },

    #[error("control `{which}` is not in GL+: hermitian residual {residual:e}, lambda_min {lambda_min:e}")]
    NotGlPlus {
        which: &'static str,
        residual: f64,
        lambda_min: f64,
    },

    #[error("controls C and C' do not commute (commutator norm {commutator:e})")]
    NonCommutingControls { commutator: f64 },

    #[error("frame operator does not commute with the controls; refusing to certify bounds")]
    CommutationAssumption,

    #[error("subset mask has width {actual}, instance has {expected} members")]
    SubsetWidth { expected: usize, actual: usize },

    #[error("family has {members} members; exhaustive enumeration is capped at {cap}")]
    CapExceeded { members: usize, cap: usize },

    #[error("frame operator is singular (lambda_min {lambda_min:e}); vectors do not form a frame")]
    SingularFrameOperator { lambda_min: f64 },

    #[error("basis is not orthonormal (Gram deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("local family {index} on the {side} side is not a frame for its subspace")]
    LocalFrame { side: &'static str, index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
