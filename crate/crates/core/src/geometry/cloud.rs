use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, DepthImage, GeometryError, PixelMask};

/// Camera-frame points in meters, optionally with unit normals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        Self { points, normals: None }
    }

    pub fn with_normals(points: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>) -> Result<Self, GeometryError> {
        if points.len() != normals.len() {
            return Err(GeometryError::ShapeMismatch {
                expected: (points.len() as u32, 1),
                found: (normals.len() as u32, 1),
            });
        }
        if let Some(bad) = normals.iter().position(|n| (n.norm() - 1.0).abs() > 1e-6) {
            return Err(GeometryError::NonUnitNormal(bad));
        }
        Ok(Self { points, normals: Some(normals) })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn aabb(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
    }
}

/// Deprojects every pixel that is set in `mask` and has a valid depth, in
/// row-major order.
pub fn depth_to_cloud(
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    mask: &PixelMask,
) -> Result<PointCloud, GeometryError> {
    if mask.dims() != depth.dims() {
        return Err(GeometryError::ShapeMismatch { expected: depth.dims(), found: mask.dims() });
    }
    if depth.dims() != (intr.width, intr.height) {
        return Err(GeometryError::ShapeMismatch {
            expected: (intr.width, intr.height),
            found: depth.dims(),
        });
    }
    let points = mask
        .iter_set()
        .filter(|&(u, v)| depth.is_valid(u, v))
        .map(|(u, v)| intr.deproject(u as f64, v as f64, depth.get(u, v)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PointCloud::new(points))
}

/// Arithmetic mean of the cloud's points.
pub fn mask_centroid(cloud: &PointCloud) -> Result<Vector3<f64>, GeometryError> {
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    let sum = cloud.points.iter().fold(Vector3::zeros(), |acc, p| acc + p);
    Ok(sum / cloud.len() as f64)
}
