use thiserror::Error;

/// Errors raised while building or evaluating a signaling game.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value is inconsistent. `field` names the offending input.
    #[error("invalid configuration for `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// An utterance carries a value outside the admissible value set.
    #[error("invalid utterance: value {value} is not in the value set")]
    InvalidUtterance { value: f64 },

    /// Every candidate had probability zero, so no distribution exists.
    #[error("empty support: every entry is -inf")]
    EmptySupport,
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
