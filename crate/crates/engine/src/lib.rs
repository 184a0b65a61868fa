//! The propose, verify, pool and select loop, plus dataset-level evaluation
//! and reporting.

use std::path::PathBuf;

use symlaw_core::dynamics::DynamicsError;
use symlaw_core::gp::GpError;
use symlaw_llm::{LlmError, PromptError};
use thiserror::Error;

pub mod fixtures;
pub mod harness;
pub mod pool;
pub mod refine;
pub mod report;
pub mod sample;
pub mod verify;

pub use harness::{run_dataset, RunConfig, RunResult, RunSummary};
pub use pool::{Candidate, HistoryPool, Origin};
pub use refine::{EpochRecord, GpSummary, LoopConfig, LoopState, Mode, Refiner};
pub use report::{report, Report, ReportError};
pub use sample::{load_dataset, DatasetError, Sample, SampleData, SampleError};
pub use verify::{evaluate_ood, verify, Verified, VerifyConfig};

/// A configuration value that cannot be used, located by its field path.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("model request failed: {0}")]
    Llm(#[from] LlmError),
    #[error("prompt: {0}")]
    Prompt(#[from] PromptError),
    #[error("genetic programming: {0}")]
    Gp(#[from] GpError),
    #[error("sample data: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: malformed record: {source}", path.display())]
    Record { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl EngineError {
    /// True for problems with the inputs rather than with the run itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            EngineError::Config(_) | EngineError::Dataset(DatasetError::Invalid { .. })
        )
    }
}
