//! Quasi-static grasp execution.
//!
//! The grasped object is the owner of the surface sample nearest to the
//! grasp center. Each finger closes along the closing axis from `±w/2`
//! toward the center and stops at the first sample within
//! `contact_tolerance` of the closing line. A grasp succeeds when both
//! fingers find a contact, both contact normals lie inside the friction cone
//! around the closing axis, the opening matches the contact separation, and
//! the gripper body box holds no sample of any other object.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{SceneDescription, SurfaceSample};
use crate::geometry::GraspPose;
use crate::gripper::{GraspTolerances, GripperSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    NoContact,
    NonAntipodal,
    WidthMismatch,
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<FailureReason>,
    /// Object the fingers closed on, when one was found.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grasped_object: Option<u32>,
}

impl ExecutionOutcome {
    fn fail(reason: FailureReason, grasped_object: Option<u32>) -> Self {
        Self { success: false, failure_reason: Some(reason), grasped_object }
    }
}

/// Executes a world-frame grasp against the scene's surface samples.
pub fn simulate_grasp(scene: &SceneDescription, g: &GraspPose, gripper: &GripperSpec) -> ExecutionOutcome {
    simulate_grasp_with(scene, g, gripper, &GraspTolerances::default())
}

pub fn simulate_grasp_with(
    scene: &SceneDescription,
    g: &GraspPose,
    gripper: &GripperSpec,
    tol: &GraspTolerances,
) -> ExecutionOutcome {
    let t = g.translation;
    let x = g.closing_axis().normalize();

    let nearest = scene
        .surfaces()
        .iter()
        .flat_map(|s| s.samples.iter().map(move |p| (s.object_id, (p.point - t).norm_squared())))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let Some((target, _)) = nearest else {
        return ExecutionOutcome::fail(FailureReason::NoContact, None);
    };
    let samples = &scene.surface(target).expect("target exists").samples;

    let reach = g.width / 2.0 + tol.contact_tolerance;
    let mut plus: Option<(f64, f64, &SurfaceSample)> = None;
    let mut minus: Option<(f64, f64, &SurfaceSample)> = None;
    for s in samples {
        let d = s.point - t;
        let along = d.dot(&x);
        if along.abs() > reach {
            continue;
        }
        let lateral = (d - x * along).norm();
        if lateral > tol.contact_tolerance {
            continue;
        }
        // first sample each closing finger meets; ties go to the sample
        // closest to the closing line
        let slot = if along >= 0.0 { &mut plus } else { &mut minus };
        let key = along.abs();
        let better = match slot {
            None => true,
            Some((k, l, _)) => key > *k || (key == *k && lateral < *l),
        };
        if better {
            *slot = Some((key, lateral, s));
        }
    }
    let (Some((s_plus, _, c_plus)), Some((s_minus, _, c_minus))) = (plus, minus) else {
        return ExecutionOutcome::fail(FailureReason::NoContact, Some(target));
    };

    let cone = tol.cone_rad().cos();
    if c_plus.normal.dot(&x) < cone || c_minus.normal.dot(&(-x)) < cone {
        return ExecutionOutcome::fail(FailureReason::NonAntipodal, Some(target));
    }

    let separation = s_plus + s_minus;
    if (g.width - separation).abs() > tol.width_tolerance {
        return ExecutionOutcome::fail(FailureReason::WidthMismatch, Some(target));
    }

    let world_to_gripper = {
        let r = g.rotation.transpose();
        move |p: &Vector3<f64>| r * (p - t)
    };
    let b = &gripper.body_extent;
    let half_x = g.width / 2.0 + b.finger_thickness;
    let half_y = b.finger_width / 2.0;
    let z_max = gripper.fingertip_reach();
    let z_min = z_max - gripper.finger_depth - b.palm_depth;
    let blocked = scene.surfaces().iter().filter(|s| s.object_id != target).any(|s| {
        s.samples.iter().any(|p| {
            let q = world_to_gripper(&p.point);
            q.x.abs() <= half_x && q.y.abs() <= half_y && q.z >= z_min && q.z <= z_max
        })
    });
    if blocked {
        return ExecutionOutcome::fail(FailureReason::Collision, Some(target));
    }
    ExecutionOutcome { success: true, failure_reason: None, grasped_object: Some(target) }
}

/// Corners of the gripper body box in the world frame, for inspection.
pub fn gripper_box_corners(g: &GraspPose, gripper: &GripperSpec) -> [Point3<f64>; 8] {
    let b = &gripper.body_extent;
    let hx = g.width / 2.0 + b.finger_thickness;
    let hy = b.finger_width / 2.0;
    let z1 = gripper.fingertip_reach();
    let z0 = z1 - gripper.finger_depth - b.palm_depth;
    let mut out = [Point3::origin(); 8];
    for (i, c) in out.iter_mut().enumerate() {
        let local = Vector3::new(
            if i & 1 == 0 { -hx } else { hx },
            if i & 2 == 0 { -hy } else { hy },
            if i & 4 == 0 { z0 } else { z1 },
        );
        *c = Point3::from(g.rotation * local + g.translation);
    }
    out
}
