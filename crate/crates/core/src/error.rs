use thiserror::Error;

/// Errors produced by the group primitives, integrators, objectives and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The rotation angle is too close to pi for the logarithm to pick an axis.
    #[error("rotation angle {angle} is within 1e-6 of pi; logarithm axis is ambiguous")]
    LogBranch { angle: f64 },

    /// `|a| >= 1` in the explicit relative-rotation solve; the step must shrink.
    #[error("step too large: |a| = {norm} >= 1")]
    StepTooLarge { norm: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("step failure at t = {t}: {reason} (last residual {residual:e})")]
    StepFailure {
        t: f64,
        residual: f64,
        reason: String,
    },

    #[error("integration failure at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("feature {index} is behind the camera (depth {depth})")]
    BehindCamera { index: usize, depth: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of a numerical solver, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::StepTooLarge { .. }
                | Error::Convergence { .. }
                | Error::StepFailure { .. }
                | Error::IntegrationFailure { .. }
        )
    }
}
