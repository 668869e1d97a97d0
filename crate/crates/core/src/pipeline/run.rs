use nalgebra::{Isometry3, Point3};
use serde::{Deserialize, Serialize};

use super::config::{GraspSourceKind, GroundingKind, ReasoningKind};
use super::trace::{ExecutionRecord, GroundingRecord, SelectionRecord, Stage, StageRecord};
use super::{Executor, Observation, PipelineConfig, PipelineError, RunTrace, TraceStore};
use crate::geometry::{CameraPose, GeometryError, GraspPose, PixelMask, PointCloud};
use crate::grounding::{ground_part, GroundingBackend, GroundingError, OracleGrounding, RemoteGrounding};
use crate::reasoning::{
    infer_affordance_with, Instruction, MockBackend, MockRules, ReasoningBackend, ReasoningError, ReasoningResult,
    RemoteReasoningBackend,
};
use crate::scene::{simulate_grasp, ExecutionOutcome, SceneDescription};
use crate::selection::{constrain_and_select, SelectionError};
use crate::synthesis::{AntipodalSampler, CandidateSet, GraspSource, RemoteGraspSource, SynthesisError};

pub const MASK_FILE: &str = "mask.png";
pub const CLOUD_FILE: &str = "cloud.json";
pub const GRASPS_FILE: &str = "grasps.json";
pub const TRACE_FILE: &str = "trace.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Started,
    Ok,
    Failed,
}

/// Stage transition reported while a run is in progress.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressEvent {
    pub run_id: String,
    pub stage: Stage,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Artifacts referenced by a trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunArtifacts {
    pub mask: Option<PixelMask>,
    pub cloud: Option<PointCloud>,
    pub candidates: Option<CandidateSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: RunTrace,
    pub artifacts: RunArtifacts,
}

/// Backends for one run. Mock reasoning and oracle grounding are built from
/// the observation's ground truth.
pub struct Backends {
    pub reasoning: Box<dyn ReasoningBackend>,
    pub grounding: Box<dyn GroundingBackend>,
    pub grasp: Box<dyn GraspSource>,
}

impl Backends {
    pub fn reasoning_for(cfg: &PipelineConfig, obs: &Observation) -> Result<Box<dyn ReasoningBackend>, ReasoningError> {
        match cfg.reasoning.backend {
            ReasoningKind::Mock => {
                let gt = obs.ground_truth.as_ref().ok_or_else(|| {
                    ReasoningError::BackendUnavailable("mock reasoning needs ground-truth labels".into())
                })?;
                let rules = match &cfg.reasoning.rules {
                    Some(path) => MockRules::load(path).map_err(ReasoningError::BackendUnavailable)?,
                    None => MockRules::default(),
                };
                Ok(Box::new(MockBackend::new(rules, gt.visible_objects())))
            }
            ReasoningKind::Remote => Ok(Box::new(RemoteReasoningBackend::new(cfg.reasoning.remote.clone())?)),
        }
    }

    pub fn grounding_for(cfg: &PipelineConfig, obs: &Observation) -> Result<Box<dyn GroundingBackend>, GroundingError> {
        match cfg.grounding.backend {
            GroundingKind::Oracle => {
                let gt = obs.ground_truth.as_ref().ok_or_else(|| {
                    GroundingError::BackendUnavailable("oracle grounding needs ground-truth labels".into())
                })?;
                Ok(Box::new(OracleGrounding::new(gt.labels.clone(), gt.objects.clone())))
            }
            GroundingKind::Remote => Ok(Box::new(RemoteGrounding::new(cfg.grounding.remote.clone())?)),
        }
    }

    pub fn grasp_for(cfg: &PipelineConfig) -> Result<Box<dyn GraspSource>, SynthesisError> {
        match cfg.grasp.source {
            GraspSourceKind::Sampler => Ok(Box::new(AntipodalSampler::new(cfg.gripper, cfg.grasp.sampler))),
            GraspSourceKind::Remote => Ok(Box::new(RemoteGraspSource::new(cfg.grasp.remote.clone(), cfg.gripper)?)),
        }
    }
}

fn reasoning_kind(e: &ReasoningError) -> &'static str {
    match e {
        ReasoningError::InvalidInstruction(_) => "InvalidInstruction",
        ReasoningError::EmptyImage => "EmptyImage",
        ReasoningError::ParseFailure { .. } => "ParseFailure",
        ReasoningError::MalformedReasoning { .. } => "MalformedReasoning",
        ReasoningError::BackendUnavailable(_) => "BackendUnavailable",
        ReasoningError::NoRelevantObject { .. } => "NoRelevantObject",
    }
}

fn grounding_kind(e: &GroundingError) -> &'static str {
    match e {
        GroundingError::ObjectNotFound(_) => "ObjectNotFound",
        GroundingError::PartNotFound { .. } => "PartNotFound",
        GroundingError::OutOfBounds { .. } => "OutOfBounds",
        GroundingError::EmptyQuery => "EmptyQuery",
        GroundingError::ShapeMismatch { .. } => "ShapeMismatch",
        GroundingError::BackendUnavailable(_) => "BackendUnavailable",
    }
}

fn selection_kind(e: &SelectionError) -> &'static str {
    match e {
        SelectionError::NoCandidates => "NoCandidates",
        SelectionError::InvalidEpsilon(_) => "InvalidEpsilon",
        SelectionError::EmptyAffordanceRegion => "EmptyAffordanceRegion",
        SelectionError::Synthesis(SynthesisError::NoFeasibleGrasp) => "NoFeasibleGrasp",
        SelectionError::Synthesis(SynthesisError::BackendUnavailable(_)) => "BackendUnavailable",
        SelectionError::Synthesis(_) => "InvalidInput",
        SelectionError::Geometry(_) => "Geometry",
    }
}

/// Maps a camera-frame grasp into the world frame.
pub fn grasp_to_world(g: &GraspPose, pose: &CameraPose) -> GraspPose {
    let iso: &Isometry3<f64> = &pose.camera_to_world;
    GraspPose {
        rotation: iso.rotation.to_rotation_matrix().into_inner() * g.rotation,
        translation: (iso * Point3::from(g.translation)).coords,
        width: g.width,
        score: g.score,
    }
}

struct Runner<'a> {
    obs: &'a Observation,
    cfg: &'a PipelineConfig,
    progress: &'a mut dyn FnMut(&ProgressEvent),
    trace: RunTrace,
    artifacts: RunArtifacts,
}

impl Runner<'_> {
    fn emit(&mut self, stage: Stage, status: StageStatus, detail: Option<String>) {
        let ev = ProgressEvent { run_id: self.trace.run_id.clone(), stage, status, detail };
        (self.progress)(&ev);
    }

    fn fail(&mut self, stage: Stage, kind: &str, message: String) {
        self.emit(stage, StageStatus::Failed, Some(format!("{kind}: {message}")));
        self.trace.push(StageRecord::failed(stage, kind, message));
    }

    fn reasoning(&mut self, instr: &Instruction, backend: Option<&dyn ReasoningBackend>) -> Option<ReasoningResult> {
        self.emit(Stage::Reasoning, StageStatus::Started, None);
        let built;
        let backend = match backend {
            Some(b) => b,
            None => match Backends::reasoning_for(self.cfg, self.obs) {
                Ok(b) => {
                    built = b;
                    built.as_ref()
                }
                Err(e) => {
                    self.fail(Stage::Reasoning, reasoning_kind(&e), e.to_string());
                    return None;
                }
            },
        };
        match infer_affordance_with(instr, &self.obs.rgb, backend, self.cfg.reasoning.attempts) {
            Ok(r) => {
                self.emit(Stage::Reasoning, StageStatus::Ok, Some(format!("{} / {}", r.answer.object, r.answer.part)));
                self.trace.push(StageRecord { reasoning: Some(r.clone()), ..StageRecord::empty(Stage::Reasoning) });
                Some(r)
            }
            Err(e) => {
                self.fail(Stage::Reasoning, reasoning_kind(&e), e.to_string());
                None
            }
        }
    }

    fn grounding(&mut self, object: &str, part: &str, affordance: &str, backend: Option<&dyn GroundingBackend>) -> bool {
        self.emit(Stage::Grounding, StageStatus::Started, None);
        let built;
        let backend = match backend {
            Some(b) => b,
            None => match Backends::grounding_for(self.cfg, self.obs) {
                Ok(b) => {
                    built = b;
                    built.as_ref()
                }
                Err(e) => {
                    self.fail(Stage::Grounding, grounding_kind(&e), e.to_string());
                    return false;
                }
            },
        };
        match ground_part(&self.obs.rgb, object, part, affordance, backend) {
            Ok(g) => {
                let record = GroundingRecord {
                    object: object.to_string(),
                    part: part.to_string(),
                    affordance: affordance.to_string(),
                    bbox: g.bbox,
                    box_confidence: g.box_confidence,
                    mask_confidence: g.mask_confidence,
                    mask_pixels: g.mask.popcount(),
                    mask_ref: MASK_FILE.to_string(),
                };
                self.emit(Stage::Grounding, StageStatus::Ok, Some(format!("{} mask pixels", record.mask_pixels)));
                self.trace.push(StageRecord { grounding: Some(record), ..StageRecord::empty(Stage::Grounding) });
                self.artifacts.mask = Some(g.mask);
                true
            }
            Err(e) => {
                self.fail(Stage::Grounding, grounding_kind(&e), e.to_string());
                false
            }
        }
    }

    fn selection(&mut self, source: Option<&dyn GraspSource>) {
        self.emit(Stage::Selection, StageStatus::Started, None);
        let built;
        let source = match source {
            Some(s) => s,
            None => match Backends::grasp_for(self.cfg) {
                Ok(s) => {
                    built = s;
                    built.as_ref()
                }
                Err(e) => {
                    let e = SelectionError::from(e);
                    self.fail(Stage::Selection, selection_kind(&e), e.to_string());
                    return;
                }
            },
        };
        let mask = self.artifacts.mask.as_ref().expect("grounding produced a mask");
        match constrain_and_select(&self.obs.depth, &self.obs.intrinsics, mask, source, self.cfg.epsilon) {
            Ok(sel) => {
                let record = SelectionRecord {
                    cloud_points: sel.cloud.len(),
                    cloud_ref: CLOUD_FILE.to_string(),
                    candidate_count: sel.candidates.len(),
                    candidates_ref: GRASPS_FILE.to_string(),
                    source_cloud_id: sel.candidates.source_cloud_id.clone(),
                    winner_world: self.obs.camera_pose.as_ref().map(|p| grasp_to_world(&sel.report.winner, p)),
                    report: sel.report,
                };
                self.emit(Stage::Selection, StageStatus::Ok, Some(format!("{} candidates", record.candidate_count)));
                self.trace.push(StageRecord { selection: Some(record), ..StageRecord::empty(Stage::Selection) });
                self.artifacts.cloud = Some(sel.cloud);
                self.artifacts.candidates = Some(sel.candidates);
            }
            Err(e) => self.fail(Stage::Selection, selection_kind(&e), e.to_string()),
        }
    }

    fn finish(self) -> Result<RunOutput, PipelineError> {
        let out = RunOutput { trace: self.trace, artifacts: self.artifacts };
        if let Some(dir) = &self.cfg.trace_dir {
            TraceStore::new(dir).write(&out)?;
        }
        Ok(out)
    }
}

fn start(instr: &str, obs: &Observation, cfg: &PipelineConfig) -> Result<RunTrace, PipelineError> {
    obs.check().map_err(|e: GeometryError| PipelineError::InvalidObservation(e.to_string()))?;
    cfg.check().map_err(PipelineError::InvalidConfig)?;
    Ok(RunTrace::new(uuid::Uuid::new_v4().to_string(), instr.to_string(), obs.reference(), cfg.clone()))
}

/// Runs reasoning, grounding and selection with backends built from `cfg`.
/// Stage failures end the run and are recorded in the trace; the trace is
/// written under `cfg.trace_dir` when set.
pub fn run_pipeline(
    instr: &Instruction,
    obs: &Observation,
    cfg: &PipelineConfig,
    progress: &mut dyn FnMut(&ProgressEvent),
) -> Result<RunOutput, PipelineError> {
    run_inner(instr, obs, cfg, None, progress)
}

/// [`run_pipeline`] with caller-supplied backends.
pub fn run_pipeline_with(
    instr: &Instruction,
    obs: &Observation,
    cfg: &PipelineConfig,
    backends: &Backends,
    progress: &mut dyn FnMut(&ProgressEvent),
) -> Result<RunOutput, PipelineError> {
    run_inner(instr, obs, cfg, Some(backends), progress)
}

fn run_inner(
    instr: &Instruction,
    obs: &Observation,
    cfg: &PipelineConfig,
    backends: Option<&Backends>,
    progress: &mut dyn FnMut(&ProgressEvent),
) -> Result<RunOutput, PipelineError> {
    let trace = start(instr.as_str(), obs, cfg)?;
    let mut r = Runner { obs, cfg, progress, trace, artifacts: RunArtifacts::default() };
    if let Some(reasoning) = r.reasoning(instr, backends.map(|b| b.reasoning.as_ref())) {
        let a = &reasoning.answer;
        if r.grounding(&a.object, &a.part, &a.affordance, backends.map(|b| b.grounding.as_ref())) {
            r.selection(backends.map(|b| b.grasp.as_ref()));
        }
    }
    r.finish()
}

/// Re-runs grounding and selection with `part` in place of the reasoned
/// part. The new trace copies the parent's reasoning stage; the parent is
/// not modified.
pub fn rerun_with_part(
    parent: &RunTrace,
    part: &str,
    obs: &Observation,
    cfg: &PipelineConfig,
    progress: &mut dyn FnMut(&ProgressEvent),
) -> Result<RunOutput, PipelineError> {
    let record = parent
        .stage(Stage::Reasoning)
        .filter(|s| s.is_ok() && s.reasoning.is_some())
        .cloned()
        .ok_or(PipelineError::NoReasoning)?;
    if part.trim().is_empty() {
        return Err(PipelineError::InvalidRequest("override part is empty".into()));
    }
    let mut trace = start(&parent.instruction, obs, cfg)?;
    trace.parent_run_id = Some(parent.run_id.clone());
    trace.push(record.clone());
    let mut r = Runner { obs, cfg, progress, trace, artifacts: RunArtifacts::default() };
    let a = &record.reasoning.as_ref().expect("checked").answer;
    if r.grounding(&a.object, part, &a.affordance, None) {
        r.selection(None);
    }
    r.finish()
}

/// Executes the trace's world-frame winner in `scene` and appends the
/// outcome. Success also requires the grasped object to be `target_object`
/// when one is given. Returns false when the run has no winner.
pub fn execute_winner(trace: &mut RunTrace, scene: &SceneDescription, target_object: Option<u32>) -> bool {
    execute_winner_with(trace, scene, target_object, &simulate_grasp).is_some_and(|o| {
        o.success && target_object.is_none_or(|t| o.grasped_object == Some(t))
    })
}

/// [`execute_winner`] with a caller-supplied executor; returns the outcome.
pub fn execute_winner_with(
    trace: &mut RunTrace,
    scene: &SceneDescription,
    target_object: Option<u32>,
    executor: &Executor,
) -> Option<ExecutionOutcome> {
    let g = trace.selection().and_then(|s| s.winner_world)?;
    let outcome = executor(scene, &g, &trace.config.gripper);
    trace.push(StageRecord {
        execution: Some(ExecutionRecord { outcome, target_object }),
        ..StageRecord::empty(Stage::Execution)
    });
    Some(outcome)
}
