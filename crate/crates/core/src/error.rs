use thiserror::Error;

/// Errors raised by the tensor algebra, the solvers and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape {dims:?}: {reason}")]
    InvalidShape { dims: Vec<usize>, reason: &'static str },

    #[error("size error: {0}")]
    Size(String),

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("non-finite entry at linear index {index}")]
    NonFinite { index: usize },

    #[error("operation requires order >= {required}, got {actual}")]
    Order { required: usize, actual: usize },

    #[error("index {index} out of range for extent {extent}")]
    IndexOutOfRange { index: usize, extent: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mask entry at linear index {index} is {value}, expected 0 or 1")]
    NotBinary { index: usize, value: f64 },

    #[error("inverse transform left imaginary residue {residue:e} (relative to {scale:e})")]
    ImaginaryResidue { residue: f64, scale: f64 },

    #[error("SVD failed to converge on Fourier face {face}")]
    SvdFailed { face: usize },

    #[error("operation undefined for the zero tensor")]
    ZeroTensor,

    #[error("sampling mask has no observed entries")]
    EmptyMask,

    #[error("format error at byte offset {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
