use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate")]
    NonFinite,

    #[error("degenerate bisector: code points {i} and {j} coincide")]
    DegenerateBisector { i: usize, j: usize },

    #[error("index {index} out of range for a codebook of {k} points")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("geometry constraint violated: {0}")]
    Geometry(String),

    #[error("lattice packing failed: needed {needed} net points, found {achieved}")]
    Packing { needed: usize, achieved: usize },

    #[error("numerical integration did not converge: {0}")]
    Integration(String),

    #[error("distribution has no density (finite support)")]
    NoDensity,

    #[error("problem too large: {count} candidates exceeds the guard of {limit}")]
    SizeGuard { count: u128, limit: u128 },

    #[error("Monte Carlo size {0} is below the minimum of 100")]
    TooFewSamples(usize),

    #[error("sign vector is not balanced (sum = {0})")]
    UnbalancedSigns(i64),

    #[error("B is undefined for codebooks with a single point")]
    SinglePointCodebook,
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
