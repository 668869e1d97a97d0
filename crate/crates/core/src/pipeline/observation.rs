use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{io, CameraIntrinsics, CameraPose, ColorImage, DepthImage, GeometryError};
use crate::scene::{LabelMap, LabeledObject, RenderedObservation};

/// Ground-truth labels that accompany synthetic observations. Mock
/// reasoning and oracle grounding read them; nothing else does.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub labels: LabelMap,
    pub objects: Vec<LabeledObject>,
}

impl GroundTruth {
    /// Objects with at least one labeled pixel, in id order.
    pub fn visible_objects(&self) -> Vec<LabeledObject> {
        let mut seen = std::collections::BTreeSet::new();
        for (_, _, id, _) in self.labels.iter_labeled() {
            seen.insert(id);
        }
        self.objects.iter().filter(|o| seen.contains(&o.id)).cloned().collect()
    }
}

/// RGB-D input of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub rgb: ColorImage,
    pub depth: DepthImage,
    pub intrinsics: CameraIntrinsics,
    /// Camera-to-world transform, when known.
    pub camera_pose: Option<CameraPose>,
    pub ground_truth: Option<GroundTruth>,
}

/// What a trace records about its observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRef {
    pub width: u32,
    pub height: u32,
    pub intrinsics: CameraIntrinsics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_pose: Option<CameraPose>,
    pub rgb_sha256: String,
    pub depth_sha256: String,
    pub has_ground_truth: bool,
}

const RGB_FILE: &str = "rgb.png";
const DEPTH_FILE: &str = "depth.png";
const LABELS_FILE: &str = "labels.png";
const INTRINSICS_FILE: &str = "intrinsics.toml";
const POSE_FILE: &str = "camera_pose.json";
const OBJECTS_FILE: &str = "objects.json";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl From<RenderedObservation> for Observation {
    fn from(r: RenderedObservation) -> Self {
        Self {
            rgb: r.rgb,
            depth: r.depth,
            intrinsics: r.intrinsics,
            camera_pose: Some(r.camera_pose),
            ground_truth: Some(GroundTruth { labels: r.labels, objects: r.objects }),
        }
    }
}

impl Observation {
    /// Image sizes must agree with the intrinsics.
    pub fn check(&self) -> Result<(), GeometryError> {
        self.intrinsics.check()?;
        let expected = (self.intrinsics.width, self.intrinsics.height);
        for found in [self.rgb.dimensions(), self.depth.dims()] {
            if found != expected {
                return Err(GeometryError::ShapeMismatch { expected, found });
            }
        }
        if let Some(gt) = &self.ground_truth {
            if gt.labels.dims() != expected {
                return Err(GeometryError::ShapeMismatch { expected, found: gt.labels.dims() });
            }
        }
        Ok(())
    }

    pub fn reference(&self) -> ObservationRef {
        let depth_bytes: Vec<u8> = self.depth.as_slice().iter().flat_map(|d| d.to_le_bytes()).collect();
        ObservationRef {
            width: self.intrinsics.width,
            height: self.intrinsics.height,
            intrinsics: self.intrinsics,
            camera_pose: self.camera_pose,
            rgb_sha256: hex(&Sha256::digest(self.rgb.as_raw())),
            depth_sha256: hex(&Sha256::digest(&depth_bytes)),
            has_ground_truth: self.ground_truth.is_some(),
        }
    }

    /// Writes the RGB and depth PNGs, the intrinsics document and, when
    /// present, the camera pose and ground-truth labels.
    pub fn save(&self, dir: &Path) -> Result<(), GeometryError> {
        std::fs::create_dir_all(dir).map_err(|e| GeometryError::Io(format!("{}: {e}", dir.display())))?;
        io::write_file(&dir.join(RGB_FILE), &io::encode_rgb_png(&self.rgb)?)?;
        io::write_file(&dir.join(DEPTH_FILE), &io::encode_depth_png(&self.depth)?)?;
        io::write_file(&dir.join(INTRINSICS_FILE), io::format_intrinsics(&self.intrinsics).as_bytes())?;
        if let Some(pose) = &self.camera_pose {
            let text = serde_json::to_string_pretty(pose).expect("pose serializes");
            io::write_file(&dir.join(POSE_FILE), text.as_bytes())?;
        }
        if let Some(gt) = &self.ground_truth {
            io::write_file(&dir.join(LABELS_FILE), &gt.labels.encode_png()?)?;
            let text = serde_json::to_string_pretty(&gt.objects).expect("objects serialize");
            io::write_file(&dir.join(OBJECTS_FILE), text.as_bytes())?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, GeometryError> {
        let rgb = io::decode_rgb_png(&io::read_file(&dir.join(RGB_FILE))?)?;
        let depth = io::decode_depth_png(&io::read_file(&dir.join(DEPTH_FILE))?)?;
        let text = String::from_utf8(io::read_file(&dir.join(INTRINSICS_FILE))?)
            .map_err(|e| GeometryError::Format(e.to_string()))?;
        let intrinsics = io::parse_intrinsics(&text)?;
        let json = |name: &str| -> Result<Option<Vec<u8>>, GeometryError> {
            let path = dir.join(name);
            if path.exists() { io::read_file(&path).map(Some) } else { Ok(None) }
        };
        let camera_pose = json(POSE_FILE)?
            .map(|b| serde_json::from_slice(&b).map_err(|e| GeometryError::Format(format!("{POSE_FILE}: {e}"))))
            .transpose()?;
        let ground_truth = match (json(LABELS_FILE)?, json(OBJECTS_FILE)?) {
            (Some(labels), Some(objects)) => Some(GroundTruth {
                labels: LabelMap::decode_png(&labels)?,
                objects: serde_json::from_slice(&objects)
                    .map_err(|e| GeometryError::Format(format!("{OBJECTS_FILE}: {e}")))?,
            }),
            _ => None,
        };
        let obs = Self { rgb, depth, intrinsics, camera_pose, ground_truth };
        obs.check()?;
        Ok(obs)
    }
}
