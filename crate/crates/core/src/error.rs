use thiserror::Error;

/// Errors produced by constructors and operations in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {left} vs {right} cells")]
    GridMismatch { left: usize, right: usize },

    #[error("grid must have at least one cell")]
    EmptyGrid,

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("values must be nondecreasing at index {index}: {prev} > {next}")]
    NotMonotone { index: usize, prev: f64, next: f64 },

    #[error("non-finite value encountered in {context} at index {index}")]
    NonFinite { context: &'static str, index: usize },

    #[error("index range {start}..{end} is not a plateau of the map")]
    NotAPlateau { start: usize, end: usize },

    #[error("numerical failure at step {step}: {reason}")]
    NumericalFailure { step: usize, reason: String },
}

impl Error {
    pub fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], context: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { context, index }),
        None => Ok(()),
    }
}
