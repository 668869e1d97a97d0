use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::normals::{estimate_normals, DEFAULT_K};
use super::{cloud_id, CandidateSet, GraspSource, SynthesisError};
use crate::geometry::{validate_grasp_pose, GraspPose, PointCloud};
use crate::gripper::{GraspTolerances, GripperSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Accepted candidates to collect.
    pub budget: usize,
    pub seed: u64,
    /// Pair draws allowed per budget unit.
    pub attempts_per_candidate: usize,
    /// Neighborhood size for normal estimation.
    pub normal_k: usize,
    /// Smallest component of a contact normal along its outward closing
    /// direction.
    pub min_facing: f64,
    /// Largest surface variation of a contact point's neighborhood;
    /// rejects points on edges, where fitted normals are unreliable.
    pub max_surface_variation: f64,
    pub tolerances: GraspTolerances,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            budget: 256,
            seed: 0,
            attempts_per_candidate: 400,
            normal_k: DEFAULT_K,
            min_facing: 0.5,
            max_surface_variation: 0.05,
            tolerances: GraspTolerances::default(),
        }
    }
}

/// Seeded antipodal pair search on a single-view cloud.
///
/// A partial view only holds camera-facing surface, so the two contacts of
/// a real pinch are rarely both visible with opposing normals. Visible
/// normals on either side of a thin part lean toward the viewer; the lean
/// both share ends up in the approach axis and is ignored by the friction
/// test. The pair then fixes a circle in the closing plane (chord `d`,
/// normals `Δ` apart, radius `d / (2 sin(Δ/2))`). The closing line must pass
/// within the contact tolerance of its center and the opening must match
/// its diameter, so that the fingers meet the part's extremes with normals
/// along the closing axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntipodalSampler {
    pub gripper: GripperSpec,
    pub cfg: SamplerConfig,
}

/// Candidate with the two cloud points that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Accepted {
    grasp: GraspPose,
    contacts: [Vector3<f64>; 2],
}

impl AntipodalSampler {
    pub fn new(gripper: GripperSpec, cfg: SamplerConfig) -> Self {
        Self { gripper, cfg }
    }

    fn try_pair(&self, p_i: &Vector3<f64>, n_i: &Vector3<f64>, p_j: &Vector3<f64>, n_j: &Vector3<f64>) -> Option<GraspPose> {
        let tol = &self.cfg.tolerances;
        let d = p_j - p_i;
        let dist = d.norm();
        if dist <= 1e-3 || dist > self.gripper.max_width {
            return None;
        }
        let x = d / dist;
        if n_i.dot(&-x) < self.cfg.min_facing || n_j.dot(&x) < self.cfg.min_facing {
            return None;
        }
        let mid = (p_i + p_j) / 2.0;
        let approach = {
            let a = -(n_i + n_j);
            let a = a - x * a.dot(&x);
            match a.try_normalize(1e-6) {
                Some(a) => a,
                None => {
                    let ray = mid.try_normalize(1e-12)?;
                    (ray - x * ray.dot(&x)).try_normalize(1e-9)?
                }
            }
        };

        // friction cone, ignoring the lean toward the viewer that both
        // visible normals share
        let (lean_i, lean_j) = (n_i.dot(&approach), n_j.dot(&approach));
        let shared = if lean_i < 0.0 && lean_j < 0.0 { lean_i.max(lean_j) } else { 0.0 };
        let side = |n: &Vector3<f64>| n - approach * shared;
        let (si, sj) = (side(n_i), side(n_j));
        let angle = |a: &Vector3<f64>, b: &Vector3<f64>| a.normalize().dot(b).clamp(-1.0, 1.0).acos();
        if angle(&si, &-x) + angle(&sj, &x) > tol.cone_rad() {
            return None;
        }

        // circle through both contacts in the closing plane: the fingers
        // meet its extremes only if the closing line passes near its center
        // and the opening matches its diameter
        let plane = |n: &Vector3<f64>| (x * n.dot(&x) + approach * n.dot(&approach)).normalize();
        let half = angle(&plane(n_i), &plane(n_j)) / 2.0;
        if half.sin() <= 1e-9 {
            return None;
        }
        let radius = dist / (2.0 * half.sin());
        let offset = radius * half.cos();
        let width = dist + tol.clearance;
        if 2.0 * radius > self.gripper.max_width
            || offset > tol.contact_tolerance
            || (width - 2.0 * radius).abs() > tol.width_tolerance
        {
            return None;
        }

        let y = approach.cross(&x);
        let score = 0.5 * (n_i.dot(&-x).max(0.0) + n_j.dot(&x).max(0.0));
        Some(GraspPose {
            rotation: Matrix3::from_columns(&[x, y, approach]),
            translation: mid,
            width,
            score: score.clamp(0.0, 1.0),
        })
    }

    fn search(&self, points: &[Vector3<f64>], normals: &[Vector3<f64>], usable: &[usize]) -> Vec<Accepted> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let mut out = Vec::new();
        let attempts = self.cfg.budget.saturating_mul(self.cfg.attempts_per_candidate);
        let limit = self.gripper.width_limit();
        for _ in 0..attempts {
            if out.len() >= self.cfg.budget {
                break;
            }
            let i = usable[rng.random_range(0..usable.len())];
            let j = usable[rng.random_range(0..usable.len())];
            if i == j {
                continue;
            }
            if let Some(g) = self.try_pair(&points[i], &normals[i], &points[j], &normals[j]) {
                if validate_grasp_pose(&g, limit).is_valid() {
                    out.push(Accepted { grasp: g, contacts: [points[i], points[j]] });
                }
            }
        }
        out
    }

    /// Candidates on `cloud`. Normals are estimated when the cloud has none.
    pub fn sample(&self, cloud: &PointCloud) -> Result<CandidateSet, SynthesisError> {
        if cloud.is_empty() {
            return Err(SynthesisError::InvalidInput("empty cloud".into()));
        }
        if self.cfg.budget == 0 {
            return Err(SynthesisError::InvalidInput("budget must be at least 1".into()));
        }
        self.gripper.check().map_err(SynthesisError::InvalidInput)?;
        let (normals, valid) = match &cloud.normals {
            Some(n) => (n.clone(), vec![true; n.len()]),
            None if cloud.len() < 4 => return Err(SynthesisError::NoFeasibleGrasp),
            None => {
                let est = estimate_normals(cloud, self.cfg.normal_k)?;
                let valid = est.valid.iter().zip(&est.variation).map(|(&ok, &v)| ok && v <= self.cfg.max_surface_variation).collect();
                (est.cloud.normals.expect("estimated"), valid)
            }
        };
        let usable: Vec<usize> = (0..cloud.len()).filter(|&i| valid[i]).collect();
        if usable.len() < 2 {
            return Err(SynthesisError::NoFeasibleGrasp);
        }
        let mut found = self.search(&cloud.points, &normals, &usable);
        if found.is_empty() {
            return Err(SynthesisError::NoFeasibleGrasp);
        }
        found.sort_by(|a, b| {
            b.grasp.score.total_cmp(&a.grasp.score).then_with(|| {
                let (s, t) = (&a.grasp.translation, &b.grasp.translation);
                s.x.total_cmp(&t.x).then(s.y.total_cmp(&t.y)).then(s.z.total_cmp(&t.z))
            })
        });
        Ok(CandidateSet {
            source_cloud_id: cloud_id(cloud),
            contacts: found.iter().map(|a| a.contacts).collect(),
            grasps: found.into_iter().map(|a| a.grasp).collect(),
        })
    }
}

impl GraspSource for AntipodalSampler {
    fn candidates(&self, cloud: &PointCloud) -> Result<CandidateSet, SynthesisError> {
        self.sample(cloud)
    }
}

/// Samples with a default-configured sampler and the given budget.
pub fn sample_grasps(cloud: &PointCloud, gripper: &GripperSpec, budget: usize) -> Result<CandidateSet, SynthesisError> {
    AntipodalSampler::new(*gripper, SamplerConfig { budget, ..SamplerConfig::default() }).sample(cloud)
}
