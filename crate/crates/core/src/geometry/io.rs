//! PNG and text encodings for observations.
//!
//! - depth: single-channel 16-bit PNG, millimeters, 0 = no return
//! - color: 8-bit RGB PNG
//! - mask: 8-bit grayscale PNG, 0 = clear, 255 = set
//! - intrinsics: `key = value` lines for `fx`, `fy`, `cx`, `cy`, `width`, `height`

use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma, RgbImage};

use super::{CameraIntrinsics, DepthImage, GeometryError, PixelMask};

pub fn encode_depth_png(depth: &DepthImage) -> Result<Vec<u8>, GeometryError> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width(), depth.height(), depth.to_millimeters())
            .expect("buffer length matches dimensions");
    encode(&image::DynamicImage::ImageLuma16(buf))
}

pub fn decode_depth_png(bytes: &[u8]) -> Result<DepthImage, GeometryError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    let luma = match img {
        image::DynamicImage::ImageLuma16(b) => b,
        other => {
            return Err(GeometryError::Format(format!(
                "depth PNG must be 16-bit single channel, got {:?}",
                other.color()
            )))
        }
    };
    DepthImage::from_millimeters(luma.width(), luma.height(), luma.as_raw())
}

pub fn encode_rgb_png(rgb: &RgbImage) -> Result<Vec<u8>, GeometryError> {
    encode(&image::DynamicImage::ImageRgb8(rgb.clone()))
}

pub fn decode_rgb_png(bytes: &[u8]) -> Result<RgbImage, GeometryError> {
    Ok(image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8())
}

pub fn encode_mask_png(mask: &PixelMask) -> Result<Vec<u8>, GeometryError> {
    let raw = mask.bits().iter().map(|&b| if b { 255u8 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width(), mask.height(), raw).expect("buffer length matches dimensions");
    encode(&image::DynamicImage::ImageLuma8(buf))
}

pub fn decode_mask_png(bytes: &[u8]) -> Result<PixelMask, GeometryError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_luma8();
    PixelMask::from_bits(img.width(), img.height(), img.as_raw().iter().map(|&p| p >= 128).collect())
}

fn encode(img: &image::DynamicImage) -> Result<Vec<u8>, GeometryError> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), GeometryError> {
    std::fs::write(path, bytes).map_err(|e| GeometryError::Io(format!("{}: {e}", path.display())))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, GeometryError> {
    std::fs::read(path).map_err(|e| GeometryError::Io(format!("{}: {e}", path.display())))
}

pub fn format_intrinsics(intr: &CameraIntrinsics) -> String {
    format!(
        "fx = {:?}\nfy = {:?}\ncx = {:?}\ncy = {:?}\nwidth = {}\nheight = {}\n",
        intr.fx, intr.fy, intr.cx, intr.cy, intr.width, intr.height
    )
}

pub fn parse_intrinsics(text: &str) -> Result<CameraIntrinsics, GeometryError> {
    let intr: CameraIntrinsics =
        toml::from_str(text).map_err(|e| GeometryError::Format(format!("intrinsics: {e}")))?;
    intr.check()?;
    Ok(intr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_png_keeps_millimeters() {
        let depth = DepthImage::from_meters(3, 2, vec![0.0, 0.5, 1.2345, 20.0, 0.001, 0.7]).unwrap();
        let back = decode_depth_png(&encode_depth_png(&depth).unwrap()).unwrap();
        assert_eq!(back.to_millimeters(), vec![0, 500, 1235, 20000, 1, 700]);
    }

    #[test]
    fn rgb_depth_confusion_is_rejected() {
        let rgb = RgbImage::new(2, 2);
        let err = decode_depth_png(&encode_rgb_png(&rgb).unwrap()).unwrap_err();
        assert!(matches!(err, GeometryError::Format(_)));
    }

    #[test]
    fn intrinsics_text_round_trip() {
        let intr = CameraIntrinsics::new(615.2, 614.9, 320.5, 240.25, 640, 480).unwrap();
        let text = format_intrinsics(&intr);
        assert_eq!(parse_intrinsics(&text).unwrap(), intr);
    }

    #[test]
    fn intrinsics_reject_bad_values() {
        let text = "fx = -1.0\nfy = 1.0\ncx = 1.0\ncy = 1.0\nwidth = 4\nheight = 4\n";
        assert!(parse_intrinsics(text).is_err());
        assert!(parse_intrinsics("fx = 1.0\n").is_err());
    }

    #[test]
    fn mask_png_round_trip() {
        let mask = PixelMask::from_fn(7, 5, |u, v| (u + 2 * v) % 3 == 0);
        assert_eq!(decode_mask_png(&encode_mask_png(&mask).unwrap()).unwrap(), mask);
    }
}
