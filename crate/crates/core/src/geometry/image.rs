use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Largest depth, in meters, still treated as a valid return.
pub const MAX_VALID_DEPTH: f64 = 20.0;

/// Per-pixel metric depth. A value of `0.0` marks a pixel with no return.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![0.0; width as usize * height as usize] }
    }

    pub fn from_meters(width: u32, height: u32, data: Vec<f64>) -> Result<Self, GeometryError> {
        if data.len() != width as usize * height as usize {
            return Err(GeometryError::ShapeMismatch {
                expected: (width, height),
                found: (data.len() as u32, 1),
            });
        }
        Ok(Self { width, height, data })
    }

    /// Builds from the on-disk 16-bit millimeter encoding.
    pub fn from_millimeters(width: u32, height: u32, mm: &[u16]) -> Result<Self, GeometryError> {
        Self::from_meters(width, height, mm.iter().map(|&d| d as f64 / 1000.0).collect())
    }

    /// Rounds to whole millimeters; invalid or out-of-range depths become 0.
    pub fn to_millimeters(&self) -> Vec<u16> {
        self.data
            .iter()
            .map(|&d| if is_valid_depth(d) { (d * 1000.0).round().min(u16::MAX as f64) as u16 } else { 0 })
            .collect()
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

    pub fn get(&self, u: u32, v: u32) -> f64 {
        self.data[(v * self.width + u) as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, depth: f64) {
        self.data[(v * self.width + u) as usize] = depth;
    }

    pub fn is_valid(&self, u: u32, v: u32) -> bool {
        is_valid_depth(self.get(u, v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| is_valid_depth(d)).count()
    }
}

pub fn is_valid_depth(d: f64) -> bool {
    d > 0.0 && d <= MAX_VALID_DEPTH
}

/// Binary per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl PixelMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![true; width as usize * height as usize] }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, GeometryError> {
        if bits.len() != width as usize * height as usize {
            return Err(GeometryError::ShapeMismatch {
                expected: (width, height),
                found: (bits.len() as u32, 1),
            });
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for v in 0..height {
            for u in 0..width {
                bits.push(f(u, v));
            }
        }
        Self { width, height, bits }
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

    pub fn get(&self, u: u32, v: u32) -> bool {
        self.bits[(v * self.width + u) as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, on: bool) {
        self.bits[(v * self.width + u) as usize] = on;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i as u32 % w, i as u32 / w))
    }

    /// Clears every bit outside `bbox`.
    pub fn clip_to(&mut self, bbox: &BoundingBox) {
        let w = self.width;
        for (i, b) in self.bits.iter_mut().enumerate() {
            if *b && !bbox.contains(i as u32 % w, i as u32 / w) {
                *b = false;
            }
        }
    }

    /// Tight bounds of the set pixels; `None` for an empty mask.
    pub fn bounds(&self) -> Option<BoundingBox> {
        let mut it = self.iter_set();
        let (u0, v0) = it.next()?;
        let mut b = BoundingBox { u_min: u0, v_min: v0, u_max: u0 + 1, v_max: v0 + 1 };
        for (u, v) in it {
            b.u_min = b.u_min.min(u);
            b.v_min = b.v_min.min(v);
            b.u_max = b.u_max.max(u + 1);
            b.v_max = b.v_max.max(v + 1);
        }
        Some(b)
    }
}

/// Pixel rectangle `[u_min, u_max) x [v_min, v_max)`. An empty box
/// (`u_min == u_max` or `v_min == v_max`) is valid and contains nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub u_min: u32,
    pub v_min: u32,
    pub u_max: u32,
    pub v_max: u32,
}

impl BoundingBox {
    pub fn new(u_min: u32, v_min: u32, u_max: u32, v_max: u32) -> Self {
        Self { u_min, v_min, u_max, v_max }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self { u_min: 0, v_min: 0, u_max: width, v_max: height }
    }

    pub fn is_empty(&self) -> bool {
        self.u_min >= self.u_max || self.v_min >= self.v_max
    }

    pub fn area(&self) -> u64 {
        if self.is_empty() {
            0
        } else {
            (self.u_max - self.u_min) as u64 * (self.v_max - self.v_min) as u64
        }
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        u >= self.u_min && u < self.u_max && v >= self.v_min && v < self.v_max
    }

    /// Ordered, and within a `width x height` image.
    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.u_min <= self.u_max && self.v_min <= self.v_max && self.u_max <= width && self.v_max <= height
    }
}
