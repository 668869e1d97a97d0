//! Grasp candidate generation on a partial-view point cloud.

mod normals;
mod remote;
mod sampler;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{GeometryError, GraspPose, PointCloud};

pub use self::normals::{estimate_normals, NormalEstimate, DEFAULT_K};
pub use self::remote::{RemoteGraspConfig, RemoteGraspSource};
pub use self::sampler::{sample_grasps, AntipodalSampler, SamplerConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("no feasible grasp on the cloud")]
    NoFeasibleGrasp,
    #[error("invalid synthesis input: {0}")]
    InvalidInput(String),
    #[error("grasp backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Scored candidates sorted by descending score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub grasps: Vec<GraspPose>,
    /// The two cloud points behind each grasp, when the source reports them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contacts: Vec<[Vector3<f64>; 2]>,
    /// Hash of the cloud the candidates were generated on.
    pub source_cloud_id: String,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.grasps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grasps.is_empty()
    }
}

/// Anything that turns a cloud into grasp candidates.
pub trait GraspSource: Send + Sync {
    fn candidates(&self, cloud: &PointCloud) -> Result<CandidateSet, SynthesisError>;
}

/// Short content hash of a cloud's points and normals.
pub fn cloud_id(cloud: &PointCloud) -> String {
    let mut h = Sha256::new();
    for p in &cloud.points {
        for c in p.iter() {
            h.update(c.to_le_bytes());
        }
    }
    if let Some(ns) = &cloud.normals {
        for n in ns {
            for c in n.iter() {
                h.update(c.to_le_bytes());
            }
        }
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}
