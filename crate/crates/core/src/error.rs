use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operation requires a nonzero state")]
    ZeroState,

    #[error("quadratic form has imaginary part {imag:e} (Hermitian data corrupted)")]
    HermiticityViolation { imag: f64 },

    #[error("nonlinear substep did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("energy increased by {increase:e} in one step")]
    EnergyIncrease { increase: f64 },

    #[error("step at t = {t} failed after {halvings} halvings: {reason}")]
    StepFailure { t: f64, halvings: usize, reason: String },

    #[error("trajectory too short: need t = {needed}, recorded up to {available}")]
    HorizonTooShort { needed: f64, available: f64 },

    #[error("operation needs a stride-1 trajectory with recorded states")]
    StrideRequired,

    #[error("energy fully decayed at t = {t}; nothing to fit")]
    Decayed { t: f64 },

    #[error("bound function vanishes or is undefined at t = {t}")]
    VanishingBound { t: f64 },

    #[error("root finding failed: {0}")]
    RootFind(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::HermiticityViolation { .. }
                | Error::NonConvergence { .. }
                | Error::EnergyIncrease { .. }
                | Error::StepFailure { .. }
                | Error::Decayed { .. }
                | Error::VanishingBound { .. }
                | Error::RootFind(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
