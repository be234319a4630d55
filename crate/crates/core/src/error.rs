use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value failed validation. `field` is a dotted path.
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },

    #[error("no history")]
    EmptyHistory,

    #[error("no prefix statistics to select from")]
    EmptyStats,

    #[error("arm {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },

    #[error("{name} = {value} is outside [0, 1]")]
    OutsideUnitInterval { name: &'static str, value: f64 },

    #[error("KL-UCB requires bounded rewards")]
    UnboundedRewards,

    #[error("peeling constant γ=δ/(δ−1) undefined for δ = {0} (need δ > 1)")]
    PeelingUndefined(f64),

    #[error("sample distribution {distribution} is not dominated by envelope {envelope}")]
    IncompatiblePairing {
        distribution: String,
        envelope: String,
    },

    #[error("oracle policy requires access to the environment mean field")]
    MissingMeanField,

    #[error("covariate has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}
