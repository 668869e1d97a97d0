//! Camera model, depth and mask images, point clouds and grasp poses.

mod camera;
mod cloud;
mod image;
pub mod io;
mod pose;

use thiserror::Error;

pub use self::camera::{deproject_pixel, CameraIntrinsics, CameraPose};
pub use self::cloud::{depth_to_cloud, mask_centroid, PointCloud};
pub use self::image::{is_valid_depth, BoundingBox, DepthImage, PixelMask, MAX_VALID_DEPTH};
pub use self::pose::{validate_grasp_pose, GraspPose, PoseViolation, ValidityReport, ROTATION_TOLERANCE};

/// 8-bit RGB color image.
pub type ColorImage = ::image::RgbImage;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("depth {0} is not a positive finite value")]
    InvalidDepth(f64),
    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    OutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: (u32, u32), found: (u32, u32) },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("normal {0} is not unit length")]
    NonUnitNormal(usize),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<::image::ImageError> for GeometryError {
    fn from(e: ::image::ImageError) -> Self {
        GeometryError::Format(e.to_string())
    }
}
