use std::time::Duration;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{cloud_id, CandidateSet, GraspSource, SynthesisError};
use crate::geometry::{validate_grasp_pose, GraspPose, PointCloud};
use crate::gripper::GripperSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteGraspConfig {
    /// Requests go to `{base_url}/v1/grasps`.
    pub base_url: String,
    pub timeout_secs: u64,
}

impl Default for RemoteGraspConfig {
    fn default() -> Self {
        Self { base_url: "http://127.0.0.1:8200".into(), timeout_secs: 30 }
    }
}

#[derive(Deserialize)]
struct WireGrasp {
    /// Row-major 3x3.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    width: f64,
    score: f64,
}

#[derive(Deserialize)]
struct WireReply {
    grasps: Vec<WireGrasp>,
}

/// Client for an external grasp model. Sends
/// `{"points": [[x, y, z], ...], "normals": [...] | null}` and expects
/// `{"grasps": [{"rotation": [[..], [..], [..]], "translation": [x, y, z],
/// "width": w, "score": s}]}` in the cloud's frame. Grasps failing pose
/// validation are dropped.
pub struct RemoteGraspSource {
    cfg: RemoteGraspConfig,
    gripper: GripperSpec,
    client: reqwest::blocking::Client,
}

impl RemoteGraspSource {
    pub fn new(cfg: RemoteGraspConfig, gripper: GripperSpec) -> Result<Self, SynthesisError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| SynthesisError::BackendUnavailable(e.to_string()))?;
        Ok(Self { cfg, gripper, client })
    }
}

impl GraspSource for RemoteGraspSource {
    fn candidates(&self, cloud: &PointCloud) -> Result<CandidateSet, SynthesisError> {
        let url = format!("{}/v1/grasps", self.cfg.base_url.trim_end_matches('/'));
        let to_rows = |v: &[Vector3<f64>]| v.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>();
        let body = json!({
            "points": to_rows(&cloud.points),
            "normals": cloud.normals.as_deref().map(to_rows),
        });
        let down = |e: reqwest::Error| SynthesisError::BackendUnavailable(e.to_string());
        let resp = self.client.post(&url).json(&body).send().map_err(down)?;
        if !resp.status().is_success() {
            return Err(SynthesisError::BackendUnavailable(format!("{url} answered {}", resp.status())));
        }
        let reply: WireReply = resp.json().map_err(down)?;
        let limit = self.gripper.width_limit();
        let mut grasps: Vec<GraspPose> = reply
            .grasps
            .into_iter()
            .map(|w| GraspPose {
                rotation: Matrix3::from_fn(|r, c| w.rotation[r][c]),
                translation: Vector3::from(w.translation),
                width: w.width,
                score: w.score,
            })
            .filter(|g| validate_grasp_pose(g, limit).is_valid())
            .collect();
        if grasps.is_empty() {
            return Err(SynthesisError::NoFeasibleGrasp);
        }
        grasps.sort_by(|a, b| {
            b.score.total_cmp(&a.score).then_with(|| {
                let (s, t) = (&a.translation, &b.translation);
                s.x.total_cmp(&t.x).then(s.y.total_cmp(&t.y)).then(s.z.total_cmp(&t.z))
            })
        });
        Ok(CandidateSet { grasps, contacts: vec![], source_cloud_id: cloud_id(cloud) })
    }
}
