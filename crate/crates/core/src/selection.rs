//! Centroid-weighted grasp selection: the winner maximizes
//! `score / max(‖t − c‖, ε)`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{depth_to_cloud, mask_centroid, CameraIntrinsics, DepthImage, GeometryError, GraspPose, PixelMask, PointCloud};
use crate::synthesis::{CandidateSet, GraspSource, SynthesisError};

/// Default distance floor in meters.
pub const DEFAULT_EPSILON: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("candidate set is empty")]
    NoCandidates,
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("affordance mask covers no pixel with valid depth")]
    EmptyAffordanceRegion,
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub index: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub winner: GraspPose,
    pub winner_index: usize,
    pub centroid: Vector3<f64>,
    /// Every candidate, best first.
    pub ranking: Vec<RankedCandidate>,
    pub epsilon_used: f64,
}

pub fn objective(g: &GraspPose, c: &Vector3<f64>, epsilon: f64) -> f64 {
    g.score / (g.translation - c).norm().max(epsilon)
}

/// Ranks by objective; equal objectives go to the higher score, then the
/// lexicographically smaller translation, then the lower index.
pub fn select_grasp(candidates: &[GraspPose], c: &Vector3<f64>, epsilon: f64) -> Result<SelectionReport, SelectionError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(SelectionError::InvalidEpsilon(epsilon));
    }
    if candidates.is_empty() {
        return Err(SelectionError::NoCandidates);
    }
    let mut ranking: Vec<RankedCandidate> = candidates
        .iter()
        .enumerate()
        .map(|(index, g)| RankedCandidate { index, objective: objective(g, c, epsilon) })
        .collect();
    ranking.sort_by(|a, b| {
        let (ga, gb) = (&candidates[a.index], &candidates[b.index]);
        let (ta, tb) = (&ga.translation, &gb.translation);
        b.objective
            .total_cmp(&a.objective)
            .then(gb.score.total_cmp(&ga.score))
            .then(ta.x.total_cmp(&tb.x))
            .then(ta.y.total_cmp(&tb.y))
            .then(ta.z.total_cmp(&tb.z))
            .then(a.index.cmp(&b.index))
    });
    let winner_index = ranking[0].index;
    Ok(SelectionReport { winner: candidates[winner_index], winner_index, centroid: *c, ranking, epsilon_used: epsilon })
}

/// Everything the constrained selection produced, for tracing.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedSelection {
    pub cloud: PointCloud,
    pub candidates: CandidateSet,
    pub report: SelectionReport,
}

/// Builds the affordance sub-cloud, its centroid, candidates on it, and
/// selects among them.
pub fn constrain_and_select(
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    mask: &PixelMask,
    source: &dyn GraspSource,
    epsilon: f64,
) -> Result<ConstrainedSelection, SelectionError> {
    let cloud = depth_to_cloud(depth, intr, mask)?;
    if cloud.is_empty() {
        return Err(SelectionError::EmptyAffordanceRegion);
    }
    let c = mask_centroid(&cloud)?;
    let candidates = source.candidates(&cloud)?;
    let report = select_grasp(&candidates.grasps, &c, epsilon)?;
    Ok(ConstrainedSelection { cloud, candidates, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn g(score: f64, t: [f64; 3]) -> GraspPose {
        GraspPose { rotation: Matrix3::identity(), translation: Vector3::from(t), width: 0.03, score }
    }

    #[test]
    fn singleton_wins() {
        let r = select_grasp(&[g(0.01, [5.0, 5.0, 5.0])], &Vector3::zeros(), DEFAULT_EPSILON).unwrap();
        assert_eq!(r.winner_index, 0);
    }

    #[test]
    fn nearer_of_equal_scores_wins() {
        let c = Vector3::zeros();
        let r = select_grasp(&[g(0.8, [0.05, 0.0, 0.0]), g(0.8, [0.0, 0.02, 0.0])], &c, DEFAULT_EPSILON).unwrap();
        assert_eq!(r.winner_index, 1);
        assert_eq!(r.ranking.iter().map(|x| x.index).collect::<Vec<_>>(), [1, 0]);
    }

    #[test]
    fn grasp_at_centroid_is_finite() {
        let c = Vector3::new(0.1, 0.2, 0.3);
        let r = select_grasp(&[g(0.5, [0.1, 0.2, 0.3]), g(1.0, [0.1, 0.2, 0.31])], &c, DEFAULT_EPSILON).unwrap();
        assert_eq!(r.winner_index, 0);
        assert!((r.ranking[0].objective - 0.5 / DEFAULT_EPSILON).abs() < 1e-6);
    }

    #[test]
    fn exact_ties() {
        let c = Vector3::zeros();
        // same objective (0.5 / 0.5 = 1 = 0.25 / 0.25), higher score first
        let r = select_grasp(&[g(0.25, [0.25, 0.0, 0.0]), g(0.5, [0.5, 0.0, 0.0])], &c, DEFAULT_EPSILON).unwrap();
        assert_eq!(r.winner_index, 1);
        // same objective and score, smaller translation first
        let r = select_grasp(&[g(0.5, [0.0, 0.5, 0.0]), g(0.5, [-0.5, 0.0, 0.0])], &c, DEFAULT_EPSILON).unwrap();
        assert_eq!(r.winner_index, 1);
    }

    #[test]
    fn errors() {
        assert_eq!(select_grasp(&[], &Vector3::zeros(), 1e-4), Err(SelectionError::NoCandidates));
        assert!(matches!(select_grasp(&[g(1.0, [0.0; 3])], &Vector3::zeros(), 0.0), Err(SelectionError::InvalidEpsilon(_))));
    }
}
