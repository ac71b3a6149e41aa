use alloc::string::String;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("non-finite entry in input")]
    NonFinite,

    #[error("not PSD: eigenvalue {eigenvalue:e} below tolerance")]
    NotPsd { eigenvalue: f64 },

    #[error("not invertible: smallest eigenvalue {eigenvalue:e}")]
    NotInvertible { eigenvalue: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("zero direction")]
    ZeroDirection,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("radial function returned non-positive value {0:e}")]
    NonPositiveRadial(f64),

    #[error("membership oracle rejects the origin; body is not star-shaped")]
    OriginExcluded,
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
