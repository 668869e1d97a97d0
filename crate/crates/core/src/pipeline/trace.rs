use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{ObservationRef, PipelineConfig};
use crate::geometry::{BoundingBox, GraspPose};
use crate::reasoning::ReasoningResult;
use crate::scene::ExecutionOutcome;
use crate::selection::SelectionReport;

/// Version of the trace document layout.
pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Reasoning,
    Grounding,
    Selection,
    Execution,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Reasoning => "reasoning",
            Stage::Grounding => "grounding",
            Stage::Selection => "selection",
            Stage::Execution => "execution",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageError {
    /// Error variant name, e.g. `NoRelevantObject`.
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingRecord {
    pub object: String,
    pub part: String,
    pub affordance: String,
    pub bbox: BoundingBox,
    pub box_confidence: f64,
    pub mask_confidence: f64,
    pub mask_pixels: usize,
    /// File name of the mask inside the run directory.
    pub mask_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub cloud_points: usize,
    pub cloud_ref: String,
    pub candidate_count: usize,
    pub candidates_ref: String,
    pub source_cloud_id: String,
    pub report: SelectionReport,
    /// Winner in the world frame, when the camera pose is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winner_world: Option<GraspPose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub outcome: ExecutionOutcome,
    /// Object the task asked for, from scene ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_object: Option<u32>,
}

/// One stage: its output on success, or the error that ended the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<ReasoningResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounding: Option<GroundingRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<ExecutionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<StageError>,
}

impl StageRecord {
    pub(crate) fn empty(stage: Stage) -> Self {
        Self { stage, reasoning: None, grounding: None, selection: None, execution: None, error: None }
    }

    pub(crate) fn failed(stage: Stage, kind: &str, message: String) -> Self {
        Self { error: Some(StageError { kind: kind.to_string(), message }), ..Self::empty(stage) }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Record of one pipeline run. Stages are appended in pipeline order and
/// never rewritten.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub version: u32,
    pub run_id: String,
    /// Run whose reasoning stage this run reused.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_run_id: Option<String>,
    pub started_at: String,
    pub finished_at: String,
    pub instruction: String,
    pub observation: ObservationRef,
    pub config: PipelineConfig,
    pub seed: u64,
    stages: Vec<StageRecord>,
}

impl RunTrace {
    pub(crate) fn new(run_id: String, instruction: String, observation: ObservationRef, config: PipelineConfig) -> Self {
        let now = timestamp();
        Self {
            version: TRACE_FORMAT_VERSION,
            run_id,
            parent_run_id: None,
            started_at: now.clone(),
            finished_at: now,
            instruction,
            observation,
            seed: config.grasp.sampler.seed,
            config,
            stages: Vec::new(),
        }
    }

    pub fn stages(&self) -> &[StageRecord] {
        &self.stages
    }

    /// Appends a stage. Nothing may follow a failed stage.
    pub fn push(&mut self, record: StageRecord) {
        assert!(self.stages.last().is_none_or(StageRecord::is_ok), "trace already ended with an error");
        self.stages.push(record);
        self.finished_at = timestamp();
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    pub fn reasoning(&self) -> Option<&ReasoningResult> {
        self.stage(Stage::Reasoning)?.reasoning.as_ref()
    }

    pub fn grounding(&self) -> Option<&GroundingRecord> {
        self.stage(Stage::Grounding)?.grounding.as_ref()
    }

    pub fn selection(&self) -> Option<&SelectionRecord> {
        self.stage(Stage::Selection)?.selection.as_ref()
    }

    pub fn execution(&self) -> Option<&ExecutionRecord> {
        self.stage(Stage::Execution)?.execution.as_ref()
    }

    pub fn winner(&self) -> Option<&GraspPose> {
        self.selection().map(|s| &s.report.winner)
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        self.selection().map(|s| s.report.centroid)
    }

    /// The failed stage and its error, if the run failed.
    pub fn error(&self) -> Option<(Stage, &StageError)> {
        self.stages.iter().find_map(|s| s.error.as_ref().map(|e| (s.stage, e)))
    }

    pub fn is_complete(&self) -> bool {
        self.error().is_none() && self.selection().is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let t: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if t.version != TRACE_FORMAT_VERSION {
            return Err(format!("unsupported trace version {}", t.version));
        }
        Ok(t)
    }

    /// The trace with run id, parent id and timestamps blanked, for
    /// reproducibility comparisons.
    pub fn normalized(&self) -> Self {
        Self {
            run_id: String::new(),
            parent_run_id: self.parent_run_id.as_ref().map(|_| String::new()),
            started_at: String::new(),
            finished_at: String::new(),
            ..self.clone()
        }
    }
}

pub(crate) fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true)
}
