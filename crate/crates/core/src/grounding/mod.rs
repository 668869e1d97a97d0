//! Two-step visual grounding: locate the object, black out everything
//! outside its box, then segment the part on the masked image.

mod oracle;
mod remote;
pub mod rle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoundingBox, ColorImage, PixelMask};
use crate::reasoning::ReasoningResult;

pub use self::oracle::OracleGrounding;
pub use self::remote::{RemoteGrounding, RemoteGroundingConfig, REMOTE_SIZE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundingError {
    #[error("object '{0}' not found")]
    ObjectNotFound(String),
    #[error("part '{part}' not found inside the object box")]
    PartNotFound { part: String },
    #[error("box {bbox:?} outside {width}x{height} image")]
    OutOfBounds { bbox: BoundingBox, width: u32, height: u32 },
    #[error("empty grounding query")]
    EmptyQuery,
    #[error("image is {found:?}, grounding data is {expected:?}")]
    ShapeMismatch { expected: (u32, u32), found: (u32, u32) },
    #[error("grounding backend unavailable: {0}")]
    BackendUnavailable(String),
}

/// One object detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub confidence: f64,
    /// Support of the detection in pixels, used to break confidence ties.
    pub area: u64,
}

/// One part segmentation, at the resolution of the queried image.
#[derive(Debug, Clone, PartialEq)]
pub struct PartSegment {
    pub mask: PixelMask,
    pub confidence: f64,
}

/// Part query on a masked image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartQuery<'a> {
    pub object: &'a str,
    pub part: &'a str,
    pub affordance: &'a str,
    pub bbox: BoundingBox,
}

pub trait GroundingBackend: Send + Sync {
    /// Candidate boxes for `label`, in backend order.
    fn locate(&self, image: &ColorImage, label: &str) -> Result<Vec<Detection>, GroundingError>;
    /// Candidate part masks on the masked image.
    fn segment(&self, masked: &ColorImage, query: &PartQuery<'_>) -> Result<Vec<PartSegment>, GroundingError>;
}

/// Box and part mask of one grounding pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Grounding {
    pub bbox: BoundingBox,
    pub box_confidence: f64,
    pub mask: PixelMask,
    pub mask_confidence: f64,
}

/// Index of the best candidate: highest confidence, then largest area, then
/// lowest index.
pub fn best_index<T>(items: &[T], key: impl Fn(&T) -> (f64, u64)) -> Option<usize> {
    let mut best: Option<(usize, (f64, u64))> = None;
    for (i, item) in items.iter().enumerate() {
        let k = key(item);
        if best.is_none_or(|(_, b)| k.0 > b.0 || (k.0 == b.0 && k.1 > b.1)) {
            best = Some((i, k));
        }
    }
    best.map(|(i, _)| i)
}

pub fn locate_object(
    image: &ColorImage,
    object_label: &str,
    backend: &dyn GroundingBackend,
) -> Result<Detection, GroundingError> {
    if image.width() == 0 || image.height() == 0 {
        return Err(GroundingError::ShapeMismatch { expected: (1, 1), found: (0, 0) });
    }
    if object_label.trim().is_empty() {
        return Err(GroundingError::EmptyQuery);
    }
    let found: Vec<Detection> = backend
        .locate(image, object_label)?
        .into_iter()
        .filter(|d| !d.bbox.is_empty() && d.bbox.fits(image.width(), image.height()))
        .collect();
    best_index(&found, |d| (d.confidence, d.area))
        .map(|i| found[i])
        .ok_or_else(|| GroundingError::ObjectNotFound(object_label.to_string()))
}

/// Copies the pixels inside `bbox` and zeroes every other pixel.
pub fn mask_image(image: &ColorImage, bbox: &BoundingBox) -> Result<ColorImage, GroundingError> {
    let (w, h) = image.dimensions();
    if !bbox.fits(w, h) {
        return Err(GroundingError::OutOfBounds { bbox: *bbox, width: w, height: h });
    }
    let mut out = ColorImage::new(w, h);
    for v in bbox.v_min..bbox.v_max {
        for u in bbox.u_min..bbox.u_max {
            out.put_pixel(u, v, *image.get_pixel(u, v));
        }
    }
    Ok(out)
}

/// Segments `part` on the masked image; the result is clipped to `bbox`.
pub fn ground_affordance(
    masked: &ColorImage,
    query: &PartQuery<'_>,
    backend: &dyn GroundingBackend,
) -> Result<PartSegment, GroundingError> {
    if query.part.trim().is_empty() {
        return Err(GroundingError::EmptyQuery);
    }
    let (w, h) = masked.dimensions();
    let mut segments = backend.segment(masked, query)?;
    for s in &mut segments {
        if s.mask.dims() != (w, h) {
            return Err(GroundingError::ShapeMismatch { expected: (w, h), found: s.mask.dims() });
        }
        s.mask.clip_to(&query.bbox);
    }
    segments.retain(|s| s.mask.popcount() > 0);
    best_index(&segments, |s| (s.confidence, s.mask.popcount() as u64))
        .map(|i| segments.swap_remove(i))
        .ok_or_else(|| GroundingError::PartNotFound { part: query.part.to_string() })
}

/// locate, mask, segment.
pub fn ground(
    image: &ColorImage,
    reasoning: &ReasoningResult,
    backend: &dyn GroundingBackend,
) -> Result<Grounding, GroundingError> {
    ground_part(image, &reasoning.answer.object, &reasoning.answer.part, &reasoning.answer.affordance, backend)
}

pub fn ground_part(
    image: &ColorImage,
    object: &str,
    part: &str,
    affordance: &str,
    backend: &dyn GroundingBackend,
) -> Result<Grounding, GroundingError> {
    let det = locate_object(image, object, backend)?;
    let masked = mask_image(image, &det.bbox)?;
    let query = PartQuery { object, part, affordance, bbox: det.bbox };
    let seg = ground_affordance(&masked, &query, backend)?;
    Ok(Grounding { bbox: det.bbox, box_confidence: det.confidence, mask: seg.mask, mask_confidence: seg.confidence })
}

/// Case-insensitive: equal, or `query` contains `name` as a whole word.
pub(crate) fn label_matches(query: &str, name: &str) -> bool {
    let q = query.trim().to_lowercase();
    let n = name.to_lowercase();
    q == n || q.split(|c: char| !c.is_alphanumeric()).any(|w| w == n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(w: u32, h: u32, seed: u64) -> ColorImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ColorImage::from_fn(w, h, |_, _| Rgb([rng.random(), rng.random(), rng.random()]))
    }

    #[test]
    fn full_box_is_identity_and_empty_box_is_black() {
        let img = noise(17, 9, 1);
        assert_eq!(mask_image(&img, &BoundingBox::full(17, 9)).unwrap(), img);
        let black = mask_image(&img, &BoundingBox::new(5, 0, 5, 9)).unwrap();
        assert!(black.pixels().all(|p| p.0 == [0, 0, 0]));
    }

    #[test]
    fn masking_checked_pixel_by_pixel() {
        let img = noise(100, 100, 2);
        let b = BoundingBox::new(25, 25, 75, 75);
        let out = mask_image(&img, &b).unwrap();
        for v in 0..100 {
            for u in 0..100 {
                let inside = (25..75).contains(&u) && (25..75).contains(&v);
                let expect = if inside { *img.get_pixel(u, v) } else { Rgb([0, 0, 0]) };
                assert_eq!(*out.get_pixel(u, v), expect);
            }
        }
        assert_eq!(mask_image(&out, &b).unwrap(), out);
    }

    #[test]
    fn out_of_bounds_box() {
        let img = noise(10, 10, 3);
        assert!(matches!(mask_image(&img, &BoundingBox::new(0, 0, 11, 5)), Err(GroundingError::OutOfBounds { .. })));
    }

    #[test]
    fn tie_break_order() {
        let key = |x: &(f64, u64)| *x;
        assert_eq!(best_index(&[(0.5, 10), (0.9, 1), (0.9, 5), (0.9, 5)], key), Some(2));
        assert_eq!(best_index::<(f64, u64)>(&[], key), None);
    }

    #[test]
    fn label_matching() {
        assert!(label_matches("Spoon", "spoon"));
        assert!(label_matches("a wooden spoon", "spoon"));
        assert!(!label_matches("teaspoons", "spoon"));
    }
}
