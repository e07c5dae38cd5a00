//! Command errors mapped onto the pipeline's exit codes: 2 configuration,
//! 3 data access, 4 missing or mismatched artifact, 5 degenerate data.

use thiserror::Error;
use warntriage_core::checkpoint::CheckpointError;
use warntriage_core::dataset::SchemaError;
use warntriage_core::eval::EvalError;
use warntriage_core::miner::MinerError;
use warntriage_core::reranker::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data access error: {0}")]
    DataAccess(String),
    #[error("artifact error: {0}")]
    Artifact(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::DataAccess(_) => 3,
            CliError::Artifact(_) => 4,
            CliError::Degenerate(_) => 5,
        }
    }
}

impl From<MinerError> for CliError {
    fn from(e: MinerError) -> Self {
        CliError::DataAccess(e.to_string())
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        CliError::Artifact(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Artifact(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::DegenerateData(msg) => CliError::Degenerate(msg),
            TrainError::DimensionMismatch { .. } => CliError::Artifact(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Degenerate(e.to_string())
    }
}
