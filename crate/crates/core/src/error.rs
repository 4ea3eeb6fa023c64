use alloc::string::String;

/// Errors raised by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("every selected feature field is empty after normalization")]
    AllFieldsEmpty,
    #[error("vector {index} has (near) zero norm")]
    ZeroNormVector { index: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("journal table does not match the one recorded with the encoder")]
    ComboJournalMismatch,
    #[error("length mismatch: {left} rankings vs {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown journal {0}")]
    UnknownJournal(String),
    #[error("encoder backend {0:?} is not available in this build")]
    BackendUnavailable(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

impl Error {
    /// Stable variant name, used in diagnostics and wire errors.
    pub fn name(&self) -> &'static str {
        match self {
            Error::AllFieldsEmpty => "AllFieldsEmpty",
            Error::ZeroNormVector { .. } => "ZeroNormVector",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::ComboJournalMismatch => "ComboJournalMismatch",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::UnknownJournal(_) => "UnknownJournal",
            Error::BackendUnavailable(_) => "BackendUnavailable",
            Error::EmptyInput(_) => "EmptyInput",
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
