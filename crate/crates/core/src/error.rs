use thiserror::Error;

/// Errors raised by the design-of-experiments library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("parameter outside domain of `{family}`: {reason}")]
    Domain { family: String, reason: String },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("singular output state: {0}")]
    SingularState(String),

    #[error("nuisance block is singular: {0}")]
    NuisanceSingular(String),

    #[error("undefined efficiency: {0}")]
    UndefinedEfficiency(String),

    #[error("undefined estimator: {0}")]
    UndefinedEstimator(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown name `{0}`")]
    UnknownName(String),
}

impl Error {
    /// Short machine-readable tag, stable across releases.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::InvalidState(_) => "invalid-state",
            Error::InvalidMeasurement(_) => "invalid-measurement",
            Error::InvalidChannel(_) => "invalid-channel",
            Error::Domain { .. } => "domain",
            Error::DegenerateModel(_) => "degenerate-model",
            Error::SingularState(_) => "singular-state",
            Error::NuisanceSingular(_) => "nuisance-singular",
            Error::UndefinedEfficiency(_) => "undefined-efficiency",
            Error::UndefinedEstimator(_) => "undefined-estimator",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::UnknownName(_) => "unknown-name",
        }
    }

    /// True for failures caused by numerical degeneracy rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateModel(_)
                | Error::SingularState(_)
                | Error::NuisanceSingular(_)
                | Error::UndefinedEfficiency(_)
                | Error::UndefinedEstimator(_)
        )
    }

    pub(crate) fn domain(family: &str, reason: impl Into<String>) -> Self {
        Error::Domain {
            family: family.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
