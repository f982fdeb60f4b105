use thiserror::Error;

/// Errors raised by the simulation models.
#[derive(Debug, Error)]
pub enum Error {
    /// Missing or malformed configuration; `field` is a dotted path.
    #[error("configuration error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// An input lies outside the domain a model is valid for.
    #[error("{quantity} = {value} outside valid range: {reason}")]
    Domain {
        quantity: &'static str,
        value: f64,
        reason: String,
    },

    /// The frequency grid is too coarse for the requested spectrum.
    #[error("grid spacing {spacing_hz} Hz too coarse; need at most {required_hz} Hz")]
    Resolution { spacing_hz: f64, required_hz: f64 },

    /// A grid or sample range does not cover what the computation needs.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// A numerical procedure failed or its self-check did not pass.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Caller broke an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Inputs leave an inversion underdetermined.
    #[error("ill-conditioned: {0}")]
    Conditioning(String),

    #[error("fit failed: {0}")]
    FitFailed(String),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
