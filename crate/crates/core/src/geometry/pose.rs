use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Orthonormality and determinant tolerance for grasp rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Parallel-jaw grasp: rotation (gripper frame to camera frame), translation
/// of the grasp center, opening width and a non-negative confidence.
///
/// The gripper frame has x along the closing direction, z along the approach
/// direction and y completing a right-handed frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub width: f64,
    pub score: f64,
}

impl GraspPose {
    pub fn closing_axis(&self) -> Vector3<f64> {
        self.rotation.column(0).into_owned()
    }

    pub fn approach_axis(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum PoseViolation {
    NonFinite,
    /// Largest entry of `|RᵀR − I|`.
    NonOrthonormal { error: f64 },
    Reflection { determinant: f64 },
    NonPositiveWidth { width: f64 },
    WidthExceeded { width: f64, max_width: f64 },
    NegativeScore { score: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub violations: Vec<PoseViolation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every invariant the pose breaks. Never fails.
pub fn validate_grasp_pose(g: &GraspPose, max_width: f64) -> ValidityReport {
    let mut violations = Vec::new();
    let finite = g.rotation.iter().all(|v| v.is_finite())
        && g.translation.iter().all(|v| v.is_finite())
        && g.width.is_finite()
        && g.score.is_finite();
    if !finite {
        violations.push(PoseViolation::NonFinite);
        return ValidityReport { violations };
    }

    let ortho_err = (g.rotation.transpose() * g.rotation - Matrix3::identity()).abs().max();
    if ortho_err > ROTATION_TOLERANCE {
        violations.push(PoseViolation::NonOrthonormal { error: ortho_err });
    }
    let det = g.rotation.determinant();
    if det < 0.0 {
        violations.push(PoseViolation::Reflection { determinant: det });
    } else if (det - 1.0).abs() > ROTATION_TOLERANCE && ortho_err <= ROTATION_TOLERANCE {
        violations.push(PoseViolation::NonOrthonormal { error: (det - 1.0).abs() });
    }
    if g.width <= 0.0 {
        violations.push(PoseViolation::NonPositiveWidth { width: g.width });
    } else if g.width > max_width {
        violations.push(PoseViolation::WidthExceeded { width: g.width, max_width });
    }
    if g.score < 0.0 {
        violations.push(PoseViolation::NegativeScore { score: g.score });
    }
    ValidityReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose() -> GraspPose {
        GraspPose {
            rotation: Matrix3::identity(),
            translation: Vector3::new(0.0, 0.0, 0.5),
            width: 0.04,
            score: 0.9,
        }
    }

    #[test]
    fn identity_pose_is_valid() {
        assert!(validate_grasp_pose(&pose(), 0.085).is_valid());
    }

    #[test]
    fn reflection_is_reported() {
        let mut g = pose();
        g.rotation = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        let report = validate_grasp_pose(&g, 0.085);
        assert!(matches!(report.violations.as_slice(), [PoseViolation::Reflection { .. }]));
    }

    #[test]
    fn width_boundary() {
        let mut g = pose();
        g.width = 0.1;
        let report = validate_grasp_pose(&g, 0.085);
        assert!(matches!(report.violations.as_slice(), [PoseViolation::WidthExceeded { .. }]));
        g.width = 0.085;
        assert!(validate_grasp_pose(&g, 0.085).is_valid());
    }

    #[test]
    fn collects_multiple_violations() {
        let g = GraspPose {
            rotation: Matrix3::identity() * 2.0,
            translation: Vector3::zeros(),
            width: 0.0,
            score: -0.1,
        };
        let report = validate_grasp_pose(&g, 0.085);
        assert_eq!(report.violations.len(), 3);
        assert!(matches!(report.violations[0], PoseViolation::NonOrthonormal { .. }));
    }

    #[test]
    fn non_finite_short_circuits() {
        let mut g = pose();
        g.translation.x = f64::NAN;
        assert_eq!(validate_grasp_pose(&g, 0.085).violations, vec![PoseViolation::NonFinite]);
    }
}
