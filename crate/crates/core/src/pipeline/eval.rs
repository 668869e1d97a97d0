use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{execute_winner_with, run_pipeline, RunOutput};
use super::{Observation, PipelineConfig};
use crate::geometry::GraspPose;
use crate::gripper::GripperSpec;
use crate::reasoning::{Instruction, MockRules};
use crate::scene::{default_camera, generate_scene, render_observation, simulate_grasp, ExecutionOutcome, ObjectClass, SceneDescription};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Single,
    Clutter,
}

impl std::str::FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_lowercase().as_str() {
            "single" => Ok(Scenario::Single),
            "clutter" => Ok(Scenario::Clutter),
            other => Err(format!("unknown scenario '{other}'")),
        }
    }
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Single => "single",
            Scenario::Clutter => "clutter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTally {
    pub class: ObjectClass,
    pub successes: u32,
    pub attempts: u32,
}

impl ClassTally {
    pub fn gsr(&self) -> f64 {
        if self.attempts == 0 { 0.0 } else { self.successes as f64 / self.attempts as f64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub class: ObjectClass,
    pub run: u32,
    pub seed: u64,
    pub success: bool,
    /// Why the run failed: a stage error kind or an execution failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsrReport {
    pub scenario: Scenario,
    pub base_seed: u64,
    pub runs_per_class: u32,
    pub classes: Vec<ClassTally>,
    /// Total successes over total attempts.
    pub average_gsr: f64,
    pub runs: Vec<RunSummary>,
}

impl GsrReport {
    /// Tallies `runs` per class, in the order of `classes`.
    pub fn from_runs(scenario: Scenario, base_seed: u64, runs_per_class: u32, classes: &[ObjectClass], runs: Vec<RunSummary>) -> Self {
        let tallies: Vec<ClassTally> = classes
            .iter()
            .map(|&class| {
                let mine = runs.iter().filter(|r| r.class == class);
                ClassTally {
                    class,
                    successes: mine.clone().filter(|r| r.success).count() as u32,
                    attempts: mine.count() as u32,
                }
            })
            .collect();
        let s: u32 = tallies.iter().map(|t| t.successes).sum();
        let a: u32 = tallies.iter().map(|t| t.attempts).sum();
        let average_gsr = if a == 0 { 0.0 } else { s as f64 / a as f64 };
        Self { scenario, base_seed, runs_per_class, classes: tallies, average_gsr, runs }
    }

    /// Failure counts by reason.
    pub fn failures(&self) -> BTreeMap<String, u32> {
        let mut out = BTreeMap::new();
        for r in &self.runs {
            if let Some(f) = &r.failure {
                *out.entry(f.clone()).or_insert(0) += 1;
            }
        }
        out
    }

    /// Markdown table: one column per class, then "Average GSR".
    pub fn to_table(&self) -> String {
        let mut head = String::from("| Scenario |");
        let mut rule = String::from("|---|");
        let mut row = format!("| {} |", self.scenario.name());
        for t in &self.classes {
            let _ = write!(head, " {} |", t.class.name());
            rule.push_str("---|");
            let _ = write!(row, " {:.2} ({}/{}) |", t.gsr(), t.successes, t.attempts);
        }
        head.push_str(" Average GSR |");
        rule.push_str("---|");
        let _ = write!(row, " {:.2} |", self.average_gsr);
        format!("{head}\n{rule}\n{row}\n")
    }
}

/// Seed of run `run` of class `class_index`.
pub fn derive_seed(base_seed: u64, class_index: usize, run: u32) -> u64 {
    // splitmix64 over the packed indices
    let mut z = base_seed ^ ((class_index as u64) << 32 | run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Object list of one evaluation scene: the target first, then 3 to 5
/// distinct distractors from the other classes in clutter.
pub fn scene_classes(target: ObjectClass, scenario: Scenario, seed: u64) -> Vec<ObjectClass> {
    let mut out = vec![target];
    if scenario == Scenario::Clutter {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD15C_A4D5);
        let mut others: Vec<ObjectClass> = ObjectClass::ALL.into_iter().filter(|&c| c != target).collect();
        others.shuffle(&mut rng);
        let n = rng.random_range(3..=5);
        out.extend(others.into_iter().take(n));
    }
    out
}

/// Generates the evaluation scene for `seed`, re-deriving the seed when a
/// layout does not fit on the table.
pub fn evaluation_scene(target: ObjectClass, scenario: Scenario, seed: u64) -> Option<(SceneDescription, Observation)> {
    for retry in 0..10u64 {
        let s = if retry == 0 { seed } else { derive_seed(seed, 0xFFFF, retry as u32) };
        if let Ok(scene) = generate_scene(&scene_classes(target, scenario, s), s) {
            let (intr, pose) = default_camera();
            let obs = Observation::from(render_observation(&scene, &intr, &pose));
            return Some((scene, obs));
        }
    }
    None
}

pub type Executor = dyn Fn(&SceneDescription, &GraspPose, &GripperSpec) -> ExecutionOutcome + Sync;

/// One evaluation run: returns the pipeline output (with the execution
/// stage appended) and the summary.
pub fn evaluate_run(
    class: ObjectClass,
    scenario: Scenario,
    run: u32,
    seed: u64,
    cfg: &PipelineConfig,
    rules: &MockRules,
    executor: &Executor,
) -> (Option<RunOutput>, RunSummary) {
    let summary = |success: bool, failure: Option<String>| RunSummary { class, run, seed, success, failure };
    let Some((scene, obs)) = evaluation_scene(class, scenario, seed) else {
        return (None, summary(false, Some("SceneTooCrowded".into())));
    };
    let text = rules.canonical_instruction(class.name()).unwrap_or(class.name());
    let instr = Instruction::new(text).expect("canonical instructions are valid");
    let mut cfg = cfg.clone();
    cfg.grasp.sampler.seed = seed;
    let mut out = match run_pipeline(&instr, &obs, &cfg, &mut |_| {}) {
        Ok(out) => out,
        Err(e) => return (None, summary(false, Some(format!("{e}")))),
    };
    if let Some((_, err)) = out.trace.error() {
        let kind = err.kind.clone();
        return (Some(out), summary(false, Some(kind)));
    }
    let target = scene.objects.iter().find(|o| o.class == class).map(|o| o.id);
    let outcome = execute_winner_with(&mut out.trace, &scene, target, executor).expect("camera pose is known");
    let failure = if !outcome.success {
        Some(format!("{:?}", outcome.failure_reason.expect("failure has a reason")))
    } else if outcome.grasped_object != target {
        Some("WrongObject".into())
    } else {
        None
    };
    (Some(out), summary(failure.is_none(), failure))
}

/// Success rate of the pipeline on generated scenes, executed with the
/// quasi-static simulator.
pub fn evaluate_gsr(
    classes: &[ObjectClass],
    scenario: Scenario,
    runs_per_class: u32,
    cfg: &PipelineConfig,
    base_seed: u64,
) -> GsrReport {
    evaluate_gsr_with(classes, scenario, runs_per_class, cfg, base_seed, &simulate_grasp)
}

pub fn evaluate_gsr_with(
    classes: &[ObjectClass],
    scenario: Scenario,
    runs_per_class: u32,
    cfg: &PipelineConfig,
    base_seed: u64,
    executor: &Executor,
) -> GsrReport {
    let rules = match &cfg.reasoning.rules {
        Some(path) => MockRules::load(path).unwrap_or_default(),
        None => MockRules::default(),
    };
    let jobs: Vec<(usize, ObjectClass, u32)> = classes
        .iter()
        .enumerate()
        .flat_map(|(ci, &c)| (0..runs_per_class).map(move |r| (ci, c, r)))
        .collect();
    let runs: Vec<RunSummary> = jobs
        .par_iter()
        .map(|&(ci, class, run)| {
            let seed = derive_seed(base_seed, ci, run);
            evaluate_run(class, scenario, run, seed, cfg, &rules, executor).1
        })
        .collect();
    GsrReport::from_runs(scenario, base_seed, runs_per_class, classes, runs)
}
