use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic")]
    BadMagic,

    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("shape overflow: {0}")]
    ShapeOverflow(String),

    #[error("non-finite value at cell {0}")]
    NonFinite(usize),

    #[error("truncated input: {0}")]
    Truncated(String),

    #[error("cube out of bounds: {0}")]
    CubeOutOfBounds(String),

    #[error("grid geometries differ")]
    GeometryMismatch,

    #[error("shape {0:?} is not a power of two on every axis")]
    NotPowerOfTwo(Vec<usize>),

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("exponents not admissible: {0}")]
    NotAdmissible(String),

    #[error("cube family does not cover {0}")]
    FamilyCoverage(String),

    #[error("not a block: {0}")]
    NotABlock(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precision insufficient: {0}")]
    Unachievable(String),

    #[error("solver stopped after {iterations} iterations without converging (primal residual {primal_residual:.3e}, relative gap {relative_gap:.3e})")]
    NonConvergence {
        iterations: usize,
        primal_residual: f64,
        relative_gap: f64,
    },

    #[error("infeasible decomposition: {0}")]
    Infeasible(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
