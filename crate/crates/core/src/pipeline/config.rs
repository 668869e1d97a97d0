use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::gripper::GripperSpec;
use crate::reasoning::{RemoteReasoningConfig, DEFAULT_ATTEMPTS};
use crate::grounding::RemoteGroundingConfig;
use crate::selection::DEFAULT_EPSILON;
use crate::synthesis::{RemoteGraspConfig, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundingKind {
    Oracle,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspSourceKind {
    Sampler,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReasoningSettings {
    pub backend: ReasoningKind,
    /// Total backend calls per run.
    pub attempts: usize,
    /// Rule table for the mock backend; the bundled table when unset.
    pub rules: Option<PathBuf>,
    pub remote: RemoteReasoningConfig,
}

impl Default for ReasoningSettings {
    fn default() -> Self {
        Self { backend: ReasoningKind::Mock, attempts: DEFAULT_ATTEMPTS, rules: None, remote: Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundingSettings {
    pub backend: GroundingKind,
    pub remote: RemoteGroundingConfig,
}

impl Default for GroundingSettings {
    fn default() -> Self {
        Self { backend: GroundingKind::Oracle, remote: Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspSettings {
    pub source: GraspSourceKind,
    pub sampler: SamplerConfig,
    pub remote: RemoteGraspConfig,
}

impl Default for GraspSettings {
    fn default() -> Self {
        Self { source: GraspSourceKind::Sampler, sampler: Default::default(), remote: Default::default() }
    }
}

/// Full run configuration. Secrets never live here; remote backends read
/// their keys from the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub reasoning: ReasoningSettings,
    pub grounding: GroundingSettings,
    pub grasp: GraspSettings,
    pub gripper: GripperSpec,
    pub epsilon: f64,
    /// Where run directories are written; nothing is persisted when unset.
    pub trace_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            reasoning: Default::default(),
            grounding: Default::default(),
            grasp: Default::default(),
            gripper: GripperSpec::default(),
            epsilon: DEFAULT_EPSILON,
            trace_dir: None,
        }
    }
}

/// Environment variables that override config fields.
pub const ENV_OVERRIDES: [&str; 9] = [
    "TASKGRASP_REASONING",
    "TASKGRASP_GROUNDING",
    "TASKGRASP_GRASP_SOURCE",
    "TASKGRASP_VLM_URL",
    "TASKGRASP_VLM_MODEL",
    "TASKGRASP_GROUNDING_URL",
    "TASKGRASP_GRASP_URL",
    "TASKGRASP_SEED",
    "TASKGRASP_TRACE_DIR",
];

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<(), String> {
        self.gripper.check()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.reasoning.attempts == 0 {
            return Err("reasoning.attempts must be at least 1".into());
        }
        if self.grasp.sampler.budget == 0 {
            return Err("grasp.sampler.budget must be at least 1".into());
        }
        Ok(())
    }

    /// Applies overrides from `lookup`, normally `std::env::var`.
    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), String> {
        let kind = |v: &str| v.trim().to_lowercase();
        if let Some(v) = lookup("TASKGRASP_REASONING") {
            self.reasoning.backend = match kind(&v).as_str() {
                "mock" => ReasoningKind::Mock,
                "remote" => ReasoningKind::Remote,
                other => return Err(format!("TASKGRASP_REASONING: unknown backend '{other}'")),
            };
        }
        if let Some(v) = lookup("TASKGRASP_GROUNDING") {
            self.grounding.backend = match kind(&v).as_str() {
                "oracle" => GroundingKind::Oracle,
                "remote" => GroundingKind::Remote,
                other => return Err(format!("TASKGRASP_GROUNDING: unknown backend '{other}'")),
            };
        }
        if let Some(v) = lookup("TASKGRASP_GRASP_SOURCE") {
            self.grasp.source = match kind(&v).as_str() {
                "sampler" => GraspSourceKind::Sampler,
                "remote" => GraspSourceKind::Remote,
                other => return Err(format!("TASKGRASP_GRASP_SOURCE: unknown source '{other}'")),
            };
        }
        if let Some(v) = lookup("TASKGRASP_VLM_URL") {
            self.reasoning.remote.base_url = v;
        }
        if let Some(v) = lookup("TASKGRASP_VLM_MODEL") {
            self.reasoning.remote.model = v;
        }
        if let Some(v) = lookup("TASKGRASP_GROUNDING_URL") {
            self.grounding.remote.base_url = v;
        }
        if let Some(v) = lookup("TASKGRASP_GRASP_URL") {
            self.grasp.remote.base_url = v;
        }
        if let Some(v) = lookup("TASKGRASP_SEED") {
            self.grasp.sampler.seed = v.trim().parse().map_err(|e| format!("TASKGRASP_SEED: {e}"))?;
        }
        if let Some(v) = lookup("TASKGRASP_TRACE_DIR") {
            self.trace_dir = Some(PathBuf::from(v));
        }
        self.check()
    }

    pub fn apply_env(&mut self) -> Result<(), String> {
        self.apply_overrides(|k| std::env::var(k).ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.grasp.sampler.seed = 99;
        cfg.trace_dir = Some("/tmp/runs".into());
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = PipelineConfig::from_toml("epsilon = 0.001\n[grasp.sampler]\nbudget = 32\n").unwrap();
        assert_eq!(cfg.epsilon, 0.001);
        assert_eq!(cfg.grasp.sampler.budget, 32);
        assert_eq!(cfg.grasp.sampler.attempts_per_candidate, 400);
        assert!(PipelineConfig::from_toml("epsilon = 0.0").is_err());
    }

    #[test]
    fn overrides() {
        let mut cfg = PipelineConfig::default();
        let env = |k: &str| match k {
            "TASKGRASP_REASONING" => Some("Remote".to_string()),
            "TASKGRASP_SEED" => Some("7".to_string()),
            _ => None,
        };
        cfg.apply_overrides(env).unwrap();
        assert_eq!(cfg.reasoning.backend, ReasoningKind::Remote);
        assert_eq!(cfg.grasp.sampler.seed, 7);
        assert!(cfg.apply_overrides(|k| (k == "TASKGRASP_GROUNDING").then(|| "magic".into())).is_err());
    }
}
