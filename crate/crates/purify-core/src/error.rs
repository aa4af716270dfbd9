//! Error type shared by every module in the crate.

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two tensors (or a tensor and a network boundary) disagree on shape.
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    /// A configuration or argument value is outside its legal range.
    InvalidParameter { context: &'static str, message: String },
    /// A diffusion step index outside `0..=T` (or `1..=T` where stated).
    StepOutOfRange { t: usize, max: usize },
    /// A class label outside `0..classes`.
    LabelOutOfRange { row: usize, label: usize, classes: usize },
    /// NaN or infinity where a finite value is required; names the site.
    NonFinite { context: String },
    /// A raw input row that cannot be parsed; carries the 1-based line number.
    MalformedRow { line: usize, message: String },
    /// An operation that needs data received none.
    EmptyInput { context: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { context, expected, actual } => write!(
                f,
                "{context}: shape mismatch, expected {}x{} but got {}x{}",
                expected.0, expected.1, actual.0, actual.1
            ),
            Error::InvalidParameter { context, message } => {
                write!(f, "{context}: {message}")
            }
            Error::StepOutOfRange { t, max } => {
                write!(f, "diffusion step {t} out of range (T = {max})")
            }
            Error::LabelOutOfRange { row, label, classes } => {
                write!(f, "row {row}: label {label} out of range for {classes} classes")
            }
            Error::NonFinite { context } => {
                write!(f, "non-finite value in {context}")
            }
            Error::MalformedRow { line, message } => {
                write!(f, "line {line}: {message}")
            }
            Error::EmptyInput { context } => write!(f, "{context}: empty input"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
