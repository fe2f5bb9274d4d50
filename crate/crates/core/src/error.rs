use thiserror::Error;

/// Every failure the numerical core can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QtrajError {
    #[error("operator is not hermitian: max |A - A^dagger| = {residual:e}")]
    NonHermitian { residual: f64 },

    #[error("non-finite value encountered in {what}")]
    NonFinite { what: &'static str },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized: norm = {norm}")]
    Unnormalized { norm: f64 },

    #[error("impossible outcome{}: branch norm {norm:e}", fmt_outcome(.outcome))]
    ImpossibleOutcome { outcome: Option<usize>, norm: f64 },

    #[error("negative probability {value:e} for outcome {outcome}")]
    NegativeProbability { outcome: usize, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step too large: jump probability {prob} in one step at t = {time}")]
    StepTooLarge { prob: f64, time: f64 },

    #[error("truncation inadequate: tail mass {tail:e} exceeds {limit:e}")]
    Truncation { tail: f64, limit: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },
}

impl QtrajError {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        QtrajError::InvalidParameter { name, reason: reason.into() }
    }

    /// Errors raised by a numerical guard rather than by malformed input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            QtrajError::StepTooLarge { .. }
                | QtrajError::Truncation { .. }
                | QtrajError::NonConvergence { .. }
                | QtrajError::NonFinite { .. }
        )
    }

    /// Short machine-friendly name of the guard or error class.
    pub fn kind(&self) -> &'static str {
        match self {
            QtrajError::NonHermitian { .. } => "non_hermitian",
            QtrajError::NonFinite { .. } => "non_finite",
            QtrajError::DimensionMismatch { .. } => "dimension_mismatch",
            QtrajError::Unnormalized { .. } => "unnormalized",
            QtrajError::ImpossibleOutcome { .. } => "impossible_outcome",
            QtrajError::NegativeProbability { .. } => "negative_probability",
            QtrajError::InvalidParameter { .. } => "invalid_parameter",
            QtrajError::StepTooLarge { .. } => "step_too_large",
            QtrajError::Truncation { .. } => "truncation",
            QtrajError::NonConvergence { .. } => "non_convergence",
        }
    }
}

fn fmt_outcome(outcome: &Option<usize>) -> String {
    outcome.map(|i| format!(" {i}")).unwrap_or_default()
}

pub type Result<T> = std::result::Result<T, QtrajError>;
