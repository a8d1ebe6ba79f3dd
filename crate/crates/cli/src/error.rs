use thiserror::Error;

use cohort::bayes::BayesError;
use cohort::microsim::SimError;
use cohort::modelfile::ModelFileError;

/// Process exit codes. Stable; scripts may rely on them.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const IO: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const VALIDATION: i32 = 3;
    pub const BAD_ARGUMENTS: i32 = 4;
    pub const STATISTICAL_FAILURE: i32 = 5;
    pub const DIMENSION_MISMATCH: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("bad arguments: {0}")]
    BadArguments(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => exit::PARSE,
            CliError::Validation(_) => exit::VALIDATION,
            CliError::BadArguments(_) => exit::BAD_ARGUMENTS,
            CliError::DimensionMismatch(_) => exit::DIMENSION_MISMATCH,
            CliError::Io { .. } => exit::IO,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        match e {
            ModelFileError::Parse { .. } => CliError::Parse(e.to_string()),
            ModelFileError::Validation(m) => CliError::Validation(m),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InsufficientReplications(_) => CliError::BadArguments(e.to_string()),
            SimError::Model(m) => CliError::Validation(m.to_string()),
            SimError::WorkerPool(_) => CliError::BadArguments(e.to_string()),
        }
    }
}

impl From<BayesError> for CliError {
    fn from(e: BayesError) -> Self {
        match e {
            BayesError::DimensionMismatch(_) => CliError::DimensionMismatch(e.to_string()),
            BayesError::NoSamples => CliError::BadArguments(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
