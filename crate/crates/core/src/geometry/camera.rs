use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Pinhole intrinsics. Pixel coordinates are `(u, v) = (column, row)` with the
/// origin at the top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let intr = Self { fx, fy, cx, cy, width, height };
        intr.check()?;
        Ok(intr)
    }

    pub fn check(&self) -> Result<(), GeometryError> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be finite and positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    /// Lifts pixel `(u, v)` at metric `depth` into the camera frame.
    pub fn deproject(&self, u: f64, v: f64, depth: f64) -> Result<Vector3<f64>, GeometryError> {
        if depth <= 0.0 || !depth.is_finite() {
            return Err(GeometryError::InvalidDepth(depth));
        }
        if !self.contains(u, v) {
            return Err(GeometryError::OutOfBounds {
                u,
                v,
                width: self.width,
                height: self.height,
            });
        }
        Ok(Vector3::new(
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        ))
    }

    /// Projects a camera-frame point to `(u, v, depth)`. Points behind the
    /// camera yield `None`.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        if p.z.is_nan() || p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy, p.z))
    }
}

/// Free function form of [`CameraIntrinsics::deproject`].
pub fn deproject_pixel(
    u: f64,
    v: f64,
    depth: f64,
    intr: &CameraIntrinsics,
) -> Result<Vector3<f64>, GeometryError> {
    intr.deproject(u, v, depth)
}

/// Camera pose as a camera-to-world rigid transform. The camera frame is the
/// optical convention: x right, y down, z forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub camera_to_world: Isometry3<f64>,
}

impl CameraPose {
    /// Camera at `eye` looking at `target`, with `up` roughly world-up.
    pub fn look_at(eye: Point3<f64>, target: Point3<f64>, up: Vector3<f64>) -> Self {
        let z = (target - eye).normalize();
        let mut x = z.cross(&up);
        if x.norm() < 1e-9 {
            x = z.cross(&Vector3::x()).normalize();
        }
        let x = x.normalize();
        // optical y points down in the image
        let y = z.cross(&x);
        let rot = nalgebra::Rotation3::from_basis_unchecked(&[x, y, z]);
        let camera_to_world =
            Isometry3::from_parts(Translation3::from(eye.coords), UnitQuaternion::from_rotation_matrix(&rot));
        Self { camera_to_world }
    }

    pub fn world_to_camera(&self) -> Isometry3<f64> {
        self.camera_to_world.inverse()
    }
}
