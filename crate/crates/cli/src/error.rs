//! Error classification for exit codes: input/validation problems exit 1,
//! internal failures exit 2.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input(message.into())
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError::Internal(message.into())
    }
}

macro_rules! input_error_from {
    ($($ty:ty),+ $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Input(e.to_string())
            }
        })+
    };
}

input_error_from!(
    etlinks_core::embedding::ParseError,
    etlinks_core::embedding::NormalizeError,
    etlinks_core::registry::RegistryError,
    etlinks_core::alignment::AlignError,
    etlinks_core::similarity::SimilarityError,
    etlinks_core::clustering::ClusterError,
    etlinks_core::projection::ProjectionError,
    etlinks_core::validation::ValidationError,
    etlinks_harvest::HarvestError,
);

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(format!("artifact serialization failed: {e}"))
    }
}
