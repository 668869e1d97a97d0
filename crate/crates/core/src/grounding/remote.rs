use std::time::Duration;

use base64::Engine;
use image::imageops::{self, FilterType};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{rle, Detection, GroundingBackend, GroundingError, PartQuery, PartSegment};
use crate::geometry::{io, BoundingBox, ColorImage, PixelMask};

/// Side of the square image sent to the grounding service.
pub const REMOTE_SIZE: u32 = 224;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteGroundingConfig {
    /// Requests go to `{base_url}/v1/locate` and `{base_url}/v1/segment`.
    pub base_url: String,
    pub timeout_secs: u64,
}

impl Default for RemoteGroundingConfig {
    fn default() -> Self {
        Self { base_url: "http://127.0.0.1:8100".into(), timeout_secs: 30 }
    }
}

/// Client for an open-vocabulary part segmentation service.
///
/// Both endpoints take `{"image": <base64 PNG>, "query": <text>}` with the
/// image resized to 224x224. `locate` answers
/// `{"detections": [{"box": [u_min, v_min, u_max, v_max], "confidence": c}]}`
/// and `segment` answers
/// `{"masks": [{"size": [w, h], "counts": [...], "confidence": c}]}` with
/// masks run-length encoded as in [`rle`]. Results are scaled back to the
/// native resolution; masks use nearest-neighbor sampling.
pub struct RemoteGrounding {
    cfg: RemoteGroundingConfig,
    client: reqwest::blocking::Client,
}

impl RemoteGrounding {
    pub fn new(cfg: RemoteGroundingConfig) -> Result<Self, GroundingError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| GroundingError::BackendUnavailable(e.to_string()))?;
        Ok(Self { cfg, client })
    }

    fn call(&self, endpoint: &str, image: &ColorImage, query: &str) -> Result<Value, GroundingError> {
        let small = imageops::resize(image, REMOTE_SIZE, REMOTE_SIZE, FilterType::Triangle);
        let png = io::encode_rgb_png(&small).map_err(|e| GroundingError::BackendUnavailable(e.to_string()))?;
        let body = json!({
            "image": base64::engine::general_purpose::STANDARD.encode(png),
            "query": query,
        });
        let url = format!("{}/v1/{endpoint}", self.cfg.base_url.trim_end_matches('/'));
        let down = |e: reqwest::Error| GroundingError::BackendUnavailable(e.to_string());
        let resp = self.client.post(&url).json(&body).send().map_err(down)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(GroundingError::BackendUnavailable(format!("{url} answered {status}")));
        }
        resp.json().map_err(down)
    }
}

fn malformed(what: &str) -> GroundingError {
    GroundingError::BackendUnavailable(format!("malformed grounding response: {what}"))
}

/// Scales a box from `REMOTE_SIZE` coordinates out to `w x h`, rounding
/// outward.
pub(crate) fn rescale_box(b: [f64; 4], w: u32, h: u32) -> BoundingBox {
    let sx = w as f64 / REMOTE_SIZE as f64;
    let sy = h as f64 / REMOTE_SIZE as f64;
    let clamp = |x: f64, hi: u32| x.clamp(0.0, hi as f64) as u32;
    BoundingBox::new(
        clamp((b[0] * sx).floor(), w),
        clamp((b[1] * sy).floor(), h),
        clamp((b[2] * sx).ceil(), w),
        clamp((b[3] * sy).ceil(), h),
    )
}

/// Nearest-neighbor resampling of a mask to `w x h`.
pub(crate) fn rescale_mask(m: &PixelMask, w: u32, h: u32) -> PixelMask {
    let (sw, sh) = m.dims();
    PixelMask::from_fn(w, h, |u, v| {
        let su = (((u as f64 + 0.5) * sw as f64 / w as f64) as u32).min(sw - 1);
        let sv = (((v as f64 + 0.5) * sh as f64 / h as f64) as u32).min(sh - 1);
        m.get(su, sv)
    })
}

fn confidence(v: &Value) -> Result<f64, GroundingError> {
    let c = v["confidence"].as_f64().ok_or_else(|| malformed("confidence"))?;
    Ok(c.clamp(0.0, 1.0))
}

impl GroundingBackend for RemoteGrounding {
    fn locate(&self, image: &ColorImage, label: &str) -> Result<Vec<Detection>, GroundingError> {
        let (w, h) = image.dimensions();
        let resp = self.call("locate", image, label)?;
        let list = resp["detections"].as_array().ok_or_else(|| malformed("detections"))?;
        list.iter()
            .map(|d| {
                let b: [f64; 4] = serde_json::from_value(d["box"].clone()).map_err(|_| malformed("box"))?;
                let bbox = rescale_box(b, w, h);
                Ok(Detection { bbox, confidence: confidence(d)?, area: bbox.area() })
            })
            .collect()
    }

    fn segment(&self, masked: &ColorImage, query: &PartQuery<'_>) -> Result<Vec<PartSegment>, GroundingError> {
        let (w, h) = masked.dimensions();
        let text = format!("{} for {}", query.part, query.affordance);
        let resp = self.call("segment", masked, &text)?;
        let list = resp["masks"].as_array().ok_or_else(|| malformed("masks"))?;
        list.iter()
            .map(|m| {
                let size: [u32; 2] = serde_json::from_value(m["size"].clone()).map_err(|_| malformed("size"))?;
                let counts: Vec<u32> = serde_json::from_value(m["counts"].clone()).map_err(|_| malformed("counts"))?;
                if size[0] == 0 || size[1] == 0 {
                    return Err(malformed("size"));
                }
                let small = rle::decode(size[0], size[1], &counts).map_err(|e| malformed(&e))?;
                Ok(PartSegment { mask: rescale_mask(&small, w, h), confidence: confidence(m)? })
            })
            .collect()
    }
}
