use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemonError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid state: Bloch length {length} exceeds 1")]
    StateInvalid { length: f64 },

    #[error("integration diverged at step {step}; reduce dt")]
    IntegrationDiverged { step: usize },

    #[error("measurement channel has zero strength; skip the measurement update instead")]
    NoSignal,

    #[error("information diverges: outcome probability {probability} is zero")]
    DivergentInformation { probability: f64 },

    #[error("mode mismatch: {0}")]
    ModeMismatch(&'static str),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, DemonError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> DemonError {
    DemonError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
