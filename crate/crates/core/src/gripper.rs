//! Parallel-jaw gripper geometry and the contact tolerances shared by the
//! grasp sampler and the execution simulator.

use serde::{Deserialize, Serialize};

/// Box dimensions of the gripper body used for collision checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyExtent {
    /// Finger thickness along the closing axis (m).
    pub finger_thickness: f64,
    /// Finger width along the gripper y axis (m).
    pub finger_width: f64,
    /// Palm depth behind the fingers along the approach axis (m).
    pub palm_depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperSpec {
    pub max_width: f64,
    pub finger_depth: f64,
    pub body_extent: BodyExtent,
}

impl Default for GripperSpec {
    fn default() -> Self {
        Self {
            max_width: 0.085,
            finger_depth: 0.04,
            body_extent: BodyExtent { finger_thickness: 0.008, finger_width: 0.02, palm_depth: 0.03 },
        }
    }
}

impl GripperSpec {
    pub fn check(&self) -> Result<(), String> {
        let b = &self.body_extent;
        let all = [self.max_width, self.finger_depth, b.finger_thickness, b.finger_width, b.palm_depth];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err("gripper dimensions must be positive".into());
        }
        if self.max_width >= 0.3 {
            return Err(format!("max_width {} must be below 0.3 m", self.max_width));
        }
        Ok(())
    }

    /// Widest opening a generated grasp may request: the stroke plus the
    /// sampler's clearance.
    pub fn width_limit(&self) -> f64 {
        self.max_width + GraspTolerances::default().clearance
    }

    /// How far the fingertips reach past the closing line along the approach.
    pub fn fingertip_reach(&self) -> f64 {
        self.finger_depth / 4.0
    }
}

/// Contact thresholds. The sampler and the executor read the same block so
/// that sampler-valid grasps are feasible for the executor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspTolerances {
    /// Friction cone half-angle (degrees).
    pub friction_cone_deg: f64,
    /// Max distance from the closing line to a contact sample (m).
    pub contact_tolerance: f64,
    /// Max |width − contact separation| (m).
    pub width_tolerance: f64,
    /// Extra opening added to the contact distance (m).
    pub clearance: f64,
}

impl Default for GraspTolerances {
    fn default() -> Self {
        Self { friction_cone_deg: 15.0, contact_tolerance: 0.008, width_tolerance: 0.010, clearance: 0.005 }
    }
}

impl GraspTolerances {
    pub fn cone_rad(&self) -> f64 {
        self.friction_cone_deg.to_radians()
    }
}
