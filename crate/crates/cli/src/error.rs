use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("unknown ranking method `{name}`; valid methods for this model: {}", .valid.join(", "))]
    UnknownMethod { name: String, valid: Vec<String> },

    #[error(transparent)]
    Core(#[from] featrank::Error),

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for problems with the configuration, 1 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::UnknownMethod { .. } => 2,
            CliError::Core(e) if is_config_error(e) => 2,
            CliError::Core(_) | CliError::Write { .. } => 1,
        }
    }
}

fn is_config_error(e: &featrank::Error) -> bool {
    use featrank::Error::*;
    matches!(
        e,
        InvalidConfig(_) | UnknownMetric(_) | UnknownLoss(_) | UnknownFeatures(_) | DuplicateFeature(_) | MissingTarget(_)
    )
}
