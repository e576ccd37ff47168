use thiserror::Error;

use styleprint_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: CoreError,
    },
}

impl CliError {
    /// 1 for usage and configuration errors, 3 for embedding provider
    /// failures, 2 for everything else (missing or inconsistent data).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Stage { source, .. } => match source {
                CoreError::ConfigInvalid(_) | CoreError::InvalidMargin(_) => 1,
                CoreError::ProviderUnavailable { .. }
                | CoreError::AuthError(_)
                | CoreError::DimMismatch { .. }
                | CoreError::MissingFixture(_) => 3,
                _ => 2,
            },
        }
    }
}
