//! Run orchestration: reasoning, grounding and selection in one traced
//! run, trace persistence, and the success-rate harness.

mod config;
mod eval;
mod observation;
mod run;
mod store;
mod trace;

use thiserror::Error;

pub use self::config::{
    GraspSettings, GraspSourceKind, GroundingKind, GroundingSettings, PipelineConfig, ReasoningKind, ReasoningSettings,
    ENV_OVERRIDES,
};
pub use self::eval::{
    derive_seed, evaluate_gsr, evaluate_gsr_with, evaluate_run, evaluation_scene, scene_classes, ClassTally, Executor,
    GsrReport, RunSummary, Scenario,
};
pub use self::observation::{GroundTruth, Observation, ObservationRef};
pub use self::run::{
    execute_winner, execute_winner_with, grasp_to_world, rerun_with_part, run_pipeline, run_pipeline_with, Backends, ProgressEvent,
    RunArtifacts, RunOutput, StageStatus, CLOUD_FILE, GRASPS_FILE, MASK_FILE, TRACE_FILE,
};
pub use self::store::TraceStore;
pub use self::trace::{
    ExecutionRecord, GroundingRecord, RunTrace, SelectionRecord, Stage, StageError, StageRecord, TRACE_FORMAT_VERSION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("observation: {0}")]
    InvalidObservation(String),
    #[error("config: {0}")]
    InvalidConfig(String),
    #[error("could not write trace: {0}")]
    TraceWrite(String),
    #[error("run '{0}' not found")]
    NotFound(String),
    #[error("run has no completed reasoning stage")]
    NoReasoning,
    #[error("{0}")]
    InvalidRequest(String),
}
