use base64::Engine;
use serde::Deserialize;
use taskgrasp::geometry::io::{decode_depth_png, decode_rgb_png};
use taskgrasp::geometry::{CameraIntrinsics, CameraPose};
use taskgrasp::pipeline::Observation;
use taskgrasp::scene::{default_camera, generate_scene, render_observation, ObjectClass};

use crate::ApiError;

/// Body of `POST /v1/runs`. Exactly one of `scene` and `observation`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    pub instruction: String,
    #[serde(default)]
    pub scene: Option<SceneSpec>,
    #[serde(default)]
    pub observation: Option<ObservationUpload>,
    /// Sampler seed for this run.
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Synthetic scene, rendered from the default camera.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub classes: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

/// Uploaded RGB-D frame. PNGs are base64; depth is 16-bit millimeters.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationUpload {
    pub rgb_png: String,
    pub depth_png: String,
    pub intrinsics: CameraIntrinsics,
    #[serde(default)]
    pub camera_pose: Option<CameraPose>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideRequest {
    pub part: String,
}

fn png(field: &str, text: &str) -> Result<Vec<u8>, ApiError> {
    base64::engine::general_purpose::STANDARD
        .decode(text)
        .map_err(|e| ApiError::bad_request("InvalidObservation", format!("{field}: {e}")))
}

impl RunRequest {
    pub fn observation(&self) -> Result<Observation, ApiError> {
        match (&self.scene, &self.observation) {
            (Some(spec), None) => {
                let classes = spec
                    .classes
                    .iter()
                    .map(|c| c.parse::<ObjectClass>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| ApiError::bad_request("InvalidScene", e.to_string()))?;
                let scene = generate_scene(&classes, spec.seed).map_err(|e| ApiError::bad_request("InvalidScene", e.to_string()))?;
                let (intr, pose) = default_camera();
                Ok(render_observation(&scene, &intr, &pose).into())
            }
            (None, Some(up)) => {
                let bad = |e: taskgrasp::geometry::GeometryError| ApiError::bad_request("InvalidObservation", e.to_string());
                let obs = Observation {
                    rgb: decode_rgb_png(&png("rgb_png", &up.rgb_png)?).map_err(bad)?,
                    depth: decode_depth_png(&png("depth_png", &up.depth_png)?).map_err(bad)?,
                    intrinsics: up.intrinsics,
                    camera_pose: up.camera_pose,
                    ground_truth: None,
                };
                obs.check().map_err(bad)?;
                Ok(obs)
            }
            _ => Err(ApiError::bad_request("InvalidRequest", "give exactly one of 'scene' and 'observation'")),
        }
    }
}
