use thiserror::Error;

/// Errors raised by the kernel library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeopeError {
    #[error("rotor is not a unit quaternion (norm = {norm})")]
    NonUnitRotor { norm: f64 },

    #[error("rotation axis has zero length")]
    ZeroAxis,

    #[error("rotation axis is not unit length (norm = {norm})")]
    NonUnitAxis { norm: f64 },

    #[error("empty rotation list")]
    EmptyList,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sub-vector index {index} out of range {lo}..={hi}")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, GeopeError>;
