use alloc::string::String;
use alloc::vec::Vec;

use crate::ClassId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("two classes required: {0}")]
    TwoClassRequired(String),

    #[error("degenerate initialization: no candidate basis projects onto the targets")]
    DegenerateInitialization,

    /// Newton iterations ran out before the gradient dropped below tolerance.
    #[error("posterior mode search did not converge after {steps} steps (gradient norm {gradient_norm:e})")]
    ModeSearchFailure {
        steps: usize,
        gradient_norm: f64,
        last_iterate: Vec<f64>,
    },

    #[error("matrix not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("class {0} is not present in the point cloud")]
    ClassNotPresent(ClassId),

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by the data rather than by numerical trouble.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::ModeSearchFailure { .. } | Error::NotPositiveDefinite { .. }
        )
    }
}
