use image::Rgb;
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{ObjectSurface, PartSpec, SceneDescription};
use crate::geometry::{CameraIntrinsics, CameraPose, ColorImage, DepthImage, GeometryError};

const BACKGROUND: [u8; 3] = [150, 140, 120];
const PART_COLORS: [[f64; 3]; 4] = [[200.0, 90.0, 60.0], [60.0, 120.0, 210.0], [230.0, 200.0, 70.0], [90.0, 190.0, 110.0]];

/// Per-pixel `(object_id, part_index)` labels, stored as
/// `object_id * 256 + part_index` with 0 for background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    data: Vec<u16>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![0; width as usize * height as usize] }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u16>) -> Result<Self, GeometryError> {
        if data.len() != width as usize * height as usize {
            return Err(GeometryError::ShapeMismatch { expected: (width, height), found: (data.len() as u32, 1) });
        }
        Ok(Self { width, height, data })
    }

    pub fn encode(object_id: u32, part: u16) -> u16 {
        debug_assert!((1..256).contains(&object_id) && part < 256);
        (object_id * 256) as u16 + part
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn raw(&self) -> &[u16] {
        &self.data
    }

    pub fn get(&self, u: u32, v: u32) -> Option<(u32, u16)> {
        match self.data[(v * self.width + u) as usize] {
            0 => None,
            code => Some((code as u32 / 256, code % 256)),
        }
    }

    fn set(&mut self, u: u32, v: u32, object_id: u32, part: u16) {
        self.data[(v * self.width + u) as usize] = Self::encode(object_id, part);
    }

    /// `(u, v, object_id, part)` for every labeled pixel, row-major.
    pub fn iter_labeled(&self) -> impl Iterator<Item = (u32, u32, u32, u16)> + '_ {
        let w = self.width;
        self.data.iter().enumerate().filter(|(_, &c)| c != 0).map(move |(i, &c)| {
            (i as u32 % w, i as u32 / w, c as u32 / 256, c % 256)
        })
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, GeometryError> {
        let buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
            image::ImageBuffer::from_raw(self.width, self.height, self.data.clone()).expect("dims match");
        let mut out = std::io::Cursor::new(Vec::new());
        image::DynamicImage::ImageLuma16(buf).write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, GeometryError> {
        match image::load_from_memory_with_format(bytes, image::ImageFormat::Png)? {
            image::DynamicImage::ImageLuma16(b) => Self::from_raw(b.width(), b.height(), b.into_raw()),
            other => Err(GeometryError::Format(format!("label map must be 16-bit, got {:?}", other.color()))),
        }
    }
}

/// Identity and part table of one object in a rendered observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledObject {
    pub id: u32,
    pub class_name: String,
    pub parts: Vec<PartSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedObservation {
    pub rgb: ColorImage,
    pub depth: DepthImage,
    pub labels: LabelMap,
    pub intrinsics: CameraIntrinsics,
    pub camera_pose: CameraPose,
    pub objects: Vec<LabeledObject>,
}

impl RenderedObservation {
    /// Objects with at least one labeled pixel, in id order.
    pub fn visible_objects(&self) -> Vec<&LabeledObject> {
        let mut seen = std::collections::BTreeSet::new();
        for (_, _, id, _) in self.labels.iter_labeled() {
            seen.insert(id);
        }
        self.objects.iter().filter(|o| seen.contains(&o.id)).collect()
    }
}

/// Camera used for synthetic scenes: 800x600, looking down at the table
/// center from 0.75 m with a slight tilt.
pub fn default_camera() -> (CameraIntrinsics, CameraPose) {
    let intr = CameraIntrinsics::new(750.0, 750.0, 400.0, 300.0, 800, 600).expect("valid default intrinsics");
    let pose = CameraPose::look_at(Point3::new(0.0, -0.12, 0.75), Point3::origin(), Vector3::y());
    (intr, pose)
}

pub fn render_observation(
    scene: &SceneDescription,
    intr: &CameraIntrinsics,
    camera_pose: &CameraPose,
) -> RenderedObservation {
    render_surfaces(scene.surfaces(), intr, camera_pose)
}

/// Point-splat z-buffer: every camera-facing sample lands on its nearest
/// pixel and the closest sample per pixel sets depth, label and color.
pub fn render_surfaces(
    surfaces: &[ObjectSurface],
    intr: &CameraIntrinsics,
    camera_pose: &CameraPose,
) -> RenderedObservation {
    let (w, h) = (intr.width, intr.height);
    let world_to_cam = camera_pose.world_to_camera();
    let mut depth = DepthImage::new(w, h);
    let mut labels = LabelMap::new(w, h);
    let mut rgb = ColorImage::from_pixel(w, h, Rgb(BACKGROUND));

    for surface in surfaces {
        for s in &surface.samples {
            let p = world_to_cam * Point3::from(s.point);
            let n = world_to_cam.rotation * s.normal;
            if n.dot(&p.coords) >= 0.0 {
                continue;
            }
            let Some((u, v, z)) = intr.project(&p.coords) else { continue };
            let (u, v) = (u.round(), v.round());
            if !intr.contains(u, v) {
                continue;
            }
            let (u, v) = (u as u32, v as u32);
            let current = depth.get(u, v);
            if current != 0.0 && current <= z {
                continue;
            }
            depth.set(u, v, z);
            labels.set(u, v, surface.object_id, s.part);
            let shade = 0.35 + 0.65 * (-n.dot(&p.coords.normalize())).max(0.0);
            let base = PART_COLORS[s.part as usize % PART_COLORS.len()];
            let tint = 0.85 + 0.15 * ((surface.object_id % 4) as f64 / 3.0);
            rgb.put_pixel(u, v, Rgb(base.map(|c| (c * shade * tint).round().clamp(0.0, 255.0) as u8)));
        }
    }

    let objects = surfaces
        .iter()
        .map(|s| LabeledObject { id: s.object_id, class_name: s.class_name.clone(), parts: s.parts.clone() })
        .collect();
    RenderedObservation { rgb, depth, labels, intrinsics: *intr, camera_pose: *camera_pose, objects }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::shapes::{PlacedPrimitive, Primitive};
    use crate::scene::{generate_scene, ObjectClass};
    use nalgebra::Isometry3;
    use std::f64::consts::PI;

    fn axis_camera() -> (CameraIntrinsics, CameraPose) {
        let intr = CameraIntrinsics::new(300.0, 300.0, 100.0, 100.0, 201, 201).unwrap();
        (intr, CameraPose { camera_to_world: Isometry3::identity() })
    }

    fn ball(id: u32, z: f64, spacing: f64) -> ObjectSurface {
        let prim = PlacedPrimitive::new(
            Primitive::Sphere { radius: 1.0, polar_min: 0.0, polar_max: PI },
            Isometry3::identity(),
            0,
        );
        let parts = vec![PartSpec { name: "ball".into(), tags: vec![] }];
        ObjectSurface::from_primitives(id, "ball", parts, &[prim], &Isometry3::translation(0.0, 0.0, z), 1.0, spacing)
    }

    #[test]
    fn empty_scene_renders_background() {
        let (intr, pose) = axis_camera();
        let obs = render_surfaces(&[], &intr, &pose);
        assert_eq!(obs.depth.valid_count(), 0);
        assert_eq!(obs.labels.iter_labeled().count(), 0);
    }

    #[test]
    fn sphere_on_axis_has_analytic_depth() {
        let spacing = 0.01;
        let (intr, pose) = axis_camera();
        let obs = render_surfaces(&[ball(1, 2.0, spacing)], &intr, &pose);
        let d = obs.depth.get(100, 100);
        // nearest surface point of a unit sphere at z = 2 sits at z = 1
        assert!((d - 1.0).abs() <= spacing, "center depth {d}");
        assert_eq!(obs.labels.get(100, 100), Some((1, 0)));
    }

    #[test]
    fn nearer_sphere_wins_the_z_buffer() {
        let (intr, pose) = axis_camera();
        let obs = render_surfaces(&[ball(2, 3.0, 0.02), ball(1, 2.0, 0.02)], &intr, &pose);
        assert_eq!(obs.labels.get(100, 100).map(|l| l.0), Some(1));
        let obs = render_surfaces(&[ball(1, 2.0, 0.02), ball(2, 3.0, 0.02)], &intr, &pose);
        assert_eq!(obs.labels.get(100, 100).map(|l| l.0), Some(1));
    }

    #[test]
    fn labels_exactly_where_depth_is_valid() {
        let scene = generate_scene(&[ObjectClass::Mug, ObjectClass::Hammer], 9).unwrap();
        let (intr, pose) = default_camera();
        let obs = render_observation(&scene, &intr, &pose);
        for v in 0..intr.height {
            for u in 0..intr.width {
                assert_eq!(obs.depth.is_valid(u, v), obs.labels.get(u, v).is_some());
            }
        }
        assert_eq!(obs.visible_objects().len(), 2);
    }

    #[test]
    fn label_png_round_trip() {
        let mut map = LabelMap::new(3, 2);
        map.set(1, 1, 7, 2);
        let back = LabelMap::decode_png(&map.encode_png().unwrap()).unwrap();
        assert_eq!(back.get(1, 1), Some((7, 2)));
        assert_eq!(back, map);
    }
}
