use super::{label_matches, Detection, GroundingBackend, GroundingError, PartQuery, PartSegment};
use crate::geometry::{BoundingBox, ColorImage, PixelMask};
use crate::scene::{LabelMap, LabeledObject, RenderedObservation};

/// Grounding from a ground-truth label map. Boxes are the tight bounds of an
/// object's labeled pixels; part masks are the part's labeled pixels inside
/// the box. The affordance string is ignored.
#[derive(Debug, Clone)]
pub struct OracleGrounding {
    labels: LabelMap,
    objects: Vec<LabeledObject>,
}

impl OracleGrounding {
    pub fn new(labels: LabelMap, objects: Vec<LabeledObject>) -> Self {
        Self { labels, objects }
    }

    pub fn from_observation(obs: &RenderedObservation) -> Self {
        Self::new(obs.labels.clone(), obs.objects.clone())
    }

    fn check_dims(&self, image: &ColorImage) -> Result<(), GroundingError> {
        if image.dimensions() != self.labels.dims() {
            return Err(GroundingError::ShapeMismatch { expected: self.labels.dims(), found: image.dimensions() });
        }
        Ok(())
    }

    fn matching(&self, label: &str) -> impl Iterator<Item = &LabeledObject> + '_ {
        let label = label.to_string();
        self.objects.iter().filter(move |o| label_matches(&label, &o.class_name))
    }

    /// Labeled pixel count and tight bounds of one object, within `region`.
    fn extent(&self, id: u32, region: &BoundingBox) -> (u64, Option<BoundingBox>) {
        let mut count = 0;
        let mut b: Option<BoundingBox> = None;
        for (u, v, oid, _) in self.labels.iter_labeled() {
            if oid != id || !region.contains(u, v) {
                continue;
            }
            count += 1;
            b = Some(match b {
                None => BoundingBox::new(u, v, u + 1, v + 1),
                Some(b) => BoundingBox::new(b.u_min.min(u), b.v_min.min(v), b.u_max.max(u + 1), b.v_max.max(v + 1)),
            });
        }
        (count, b)
    }
}

impl GroundingBackend for OracleGrounding {
    fn locate(&self, image: &ColorImage, label: &str) -> Result<Vec<Detection>, GroundingError> {
        self.check_dims(image)?;
        let whole = BoundingBox::full(self.labels.width(), self.labels.height());
        let mut found: Vec<(u32, Detection)> = self
            .matching(label)
            .filter_map(|o| {
                let (area, bbox) = self.extent(o.id, &whole);
                bbox.map(|bbox| (o.id, Detection { bbox, confidence: 1.0, area }))
            })
            .collect();
        found.sort_by_key(|(id, _)| *id);
        Ok(found.into_iter().map(|(_, d)| d).collect())
    }

    fn segment(&self, masked: &ColorImage, query: &PartQuery<'_>) -> Result<Vec<PartSegment>, GroundingError> {
        self.check_dims(masked)?;
        // the object of the queried class owning most of the box
        let mut owner: Option<(&LabeledObject, u64)> = None;
        for o in self.matching(query.object) {
            let (n, _) = self.extent(o.id, &query.bbox);
            if n > 0 && owner.is_none_or(|(best, m)| n > m || (n == m && o.id < best.id)) {
                owner = Some((o, n));
            }
        }
        let Some((obj, _)) = owner else { return Ok(vec![]) };
        let Some(part) = obj.parts.iter().position(|p| label_matches(query.part, &p.name)) else {
            return Ok(vec![]);
        };
        let (w, h) = self.labels.dims();
        let mut mask = PixelMask::new(w, h);
        for (u, v, oid, p) in self.labels.iter_labeled() {
            if oid == obj.id && p as usize == part && query.bbox.contains(u, v) {
                mask.set(u, v, true);
            }
        }
        Ok(vec![PartSegment { mask, confidence: 1.0 }])
    }
}
