//! Parametric solids with analytic surface samples.

use std::f64::consts::{PI, TAU};

use nalgebra::{Isometry3, Vector3};

/// Shape in its own local frame, centered at the origin.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// Axis along local z, spanning `[-length/2, length/2]`.
    Cylinder { radius: f64, length: f64, caps: bool },
    Cuboid { half_extents: Vector3<f64> },
    /// Tube of radius `minor` around a circle of radius `major` in the local
    /// xy-plane, covering angles `[start, start + sweep]`.
    Torus { major: f64, minor: f64, start: f64, sweep: f64 },
    /// Sphere restricted to polar angles `[polar_min, polar_max]` from +z.
    Sphere { radius: f64, polar_min: f64, polar_max: f64 },
}

/// A primitive placed in an object's frame and tied to one of its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedPrimitive {
    pub shape: Primitive,
    pub pose: Isometry3<f64>,
    pub part: u16,
    /// Solid primitives remove other primitives' samples that fall inside them.
    pub solid: bool,
    /// Normals point toward the shape's center (inner wall of a shell).
    pub inward: bool,
}

impl PlacedPrimitive {
    pub fn new(shape: Primitive, pose: Isometry3<f64>, part: u16) -> Self {
        Self { shape, pose, part, solid: true, inward: false }
    }

    pub fn shell(mut self) -> Self {
        self.solid = false;
        self
    }

    pub fn inner_wall(mut self) -> Self {
        self.solid = false;
        self.inward = true;
        self
    }
}

fn steps(extent: f64, spacing: f64) -> usize {
    (extent / spacing).ceil().max(1.0) as usize
}

impl Primitive {
    /// Surface points and outward normals with neighbor spacing at most
    /// `spacing` along each parametric direction.
    pub fn sample(&self, spacing: f64) -> Vec<(Vector3<f64>, Vector3<f64>)> {
        let mut out = Vec::new();
        match *self {
            Primitive::Cylinder { radius, length, caps } => {
                let h = length / 2.0;
                let n_a = steps(TAU * radius, spacing).max(3);
                let n_z = steps(length, spacing) + 1;
                for i in 0..n_z {
                    let z = -h + length * i as f64 / (n_z - 1) as f64;
                    let offset = if i % 2 == 1 { 0.5 } else { 0.0 };
                    for j in 0..n_a {
                        let a = TAU * (j as f64 + offset) / n_a as f64;
                        let n = Vector3::new(a.cos(), a.sin(), 0.0);
                        out.push((Vector3::new(radius * n.x, radius * n.y, z), n));
                    }
                }
                if caps {
                    for (z, nz) in [(-h, -1.0), (h, 1.0)] {
                        disk(&mut out, radius, z, nz, spacing);
                    }
                }
            }
            Primitive::Cuboid { half_extents: e } => {
                for axis in 0..3 {
                    let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
                    let n1 = steps(2.0 * e[a1], spacing) + 1;
                    let n2 = steps(2.0 * e[a2], spacing) + 1;
                    for sign in [-1.0, 1.0] {
                        let mut normal = Vector3::zeros();
                        normal[axis] = sign;
                        for i in 0..n1 {
                            for j in 0..n2 {
                                let mut p = Vector3::zeros();
                                p[axis] = sign * e[axis];
                                p[a1] = -e[a1] + 2.0 * e[a1] * i as f64 / (n1 - 1) as f64;
                                p[a2] = -e[a2] + 2.0 * e[a2] * j as f64 / (n2 - 1) as f64;
                                out.push((p, normal));
                            }
                        }
                    }
                }
            }
            Primitive::Torus { major, minor, start, sweep } => {
                let closed = sweep >= TAU - 1e-12;
                let n_u = steps(sweep * (major + minor), spacing) + usize::from(!closed);
                let n_v = steps(TAU * minor, spacing).max(3);
                let denom = if closed { n_u } else { (n_u - 1).max(1) } as f64;
                for i in 0..n_u {
                    let u = start + sweep * i as f64 / denom;
                    let radial = Vector3::new(u.cos(), u.sin(), 0.0);
                    for j in 0..n_v {
                        let v = TAU * j as f64 / n_v as f64;
                        let n = radial * v.cos() + Vector3::z() * v.sin();
                        out.push((radial * major + n * minor, n));
                    }
                }
            }
            Primitive::Sphere { radius, polar_min, polar_max } => {
                let n_t = steps(radius * (polar_max - polar_min), spacing) + 1;
                for i in 0..n_t {
                    let t = polar_min + (polar_max - polar_min) * i as f64 / (n_t - 1).max(1) as f64;
                    let ring = steps(TAU * radius * t.sin(), spacing);
                    let ring = if t.sin() < 1e-9 { 1 } else { ring.max(3) };
                    for j in 0..ring {
                        let phi = TAU * j as f64 / ring as f64;
                        let n = Vector3::new(t.sin() * phi.cos(), t.sin() * phi.sin(), t.cos());
                        out.push((n * radius, n));
                    }
                }
            }
        }
        out
    }

    /// Strictly inside the solid, at least `margin` from its boundary.
    pub fn contains(&self, p: &Vector3<f64>, margin: f64) -> bool {
        match *self {
            Primitive::Cylinder { radius, length, .. } => {
                p.z.abs() < length / 2.0 - margin && p.x.hypot(p.y) < radius - margin
            }
            Primitive::Cuboid { half_extents: e } => (0..3).all(|i| p[i].abs() < e[i] - margin),
            Primitive::Torus { major, minor, start, sweep } => {
                let angle = (p.y.atan2(p.x) - start).rem_euclid(TAU);
                let in_sweep = sweep >= TAU - 1e-12 || angle <= sweep;
                in_sweep && (p.x.hypot(p.y) - major).hypot(p.z) < minor - margin
            }
            Primitive::Sphere { radius, polar_min, polar_max } => {
                let r = p.norm();
                if r >= radius - margin {
                    return false;
                }
                let polar = if r == 0.0 { PI / 2.0 } else { (p.z / r).clamp(-1.0, 1.0).acos() };
                polar >= polar_min && polar <= polar_max
            }
        }
    }
}

fn disk(out: &mut Vec<(Vector3<f64>, Vector3<f64>)>, radius: f64, z: f64, nz: f64, spacing: f64) {
    let n_r = steps(radius, spacing);
    let normal = Vector3::new(0.0, 0.0, nz);
    for k in 0..=n_r {
        let rho = radius * k as f64 / n_r as f64;
        let count = if k == 0 { 1 } else { steps(TAU * rho, spacing).max(3) };
        for j in 0..count {
            let a = TAU * j as f64 / count as f64;
            out.push((Vector3::new(rho * a.cos(), rho * a.sin(), z), normal));
        }
    }
}

/// Samples every primitive in the object frame, dropping samples buried in
/// another solid primitive. Returns `(point, normal, part)` triples.
pub fn sample_primitives(prims: &[PlacedPrimitive], spacing: f64) -> Vec<(Vector3<f64>, Vector3<f64>, u16)> {
    const BURIED_MARGIN: f64 = 1e-4;
    let mut out = Vec::new();
    for (i, prim) in prims.iter().enumerate() {
        for (p, n) in prim.shape.sample(spacing) {
            let n = if prim.inward { -n } else { n };
            let p_obj = prim.pose * nalgebra::Point3::from(p);
            let n_obj = prim.pose.rotation * n;
            let buried = prims.iter().enumerate().any(|(j, other)| {
                j != i && other.solid && other.shape.contains(&(other.pose.inverse() * p_obj).coords, BURIED_MARGIN)
            });
            if !buried {
                out.push((p_obj.coords, n_obj.normalize(), prim.part));
            }
        }
    }
    out
}
