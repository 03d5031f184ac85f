use alloc::string::String;

use crate::annotation::ValidationReport;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions {width}x{height}")]
    Dimension { width: usize, height: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("imaginary residue {residue:e} exceeds tolerance")]
    NumericConsistency { residue: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("tracker is stopped")]
    TrackerStopped,

    #[error("frame {index}: {message}")]
    Frame { index: usize, message: String },

    #[error("unknown instance {0:?}")]
    UnknownInstance(String),

    #[error("document failed validation with {} violation(s)", .0.violations.len())]
    Validation(ValidationReport),
}
