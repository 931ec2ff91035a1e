//! Top-level error type mapping failures onto the CLI exit codes:
//! 1 usage, 2 configuration, 3 data, 4 internal check failure.

use nestag_core::model::ModelError;
use nestag_core::training::TrainError;
use thiserror::Error;

use crate::config::ConfigError;
use crate::formats::FormatError;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Config(_) => 2,
            AppError::Data(_) => 3,
            AppError::Internal(_) => 4,
        }
    }

    pub fn data(e: impl std::fmt::Display) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<FormatError> for AppError {
    fn from(e: FormatError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<TrainError> for AppError {
    fn from(e: TrainError) -> Self {
        match &e {
            // a weight table that does not fit the model is a config problem
            TrainError::BadWeights { .. } | TrainError::InvalidBudget => {
                AppError::Config(ConfigError::Invalid {
                    reason: e.to_string(),
                })
            }
            TrainError::UnknownLabel { .. }
            | TrainError::EmptyCorpus
            | TrainError::SentenceExceedsBudget { .. }
            | TrainError::Codec(_) => AppError::Data(e.to_string()),
            _ => AppError::Internal(e.to_string()),
        }
    }
}

impl From<ModelError> for AppError {
    fn from(e: ModelError) -> Self {
        match &e {
            ModelError::InvalidSpec { .. } => AppError::Config(ConfigError::Invalid {
                reason: e.to_string(),
            }),
            ModelError::SpecMismatch { .. } => AppError::Data(e.to_string()),
            _ => AppError::Internal(e.to_string()),
        }
    }
}
