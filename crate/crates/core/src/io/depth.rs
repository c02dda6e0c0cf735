//! Depth as a 16-bit single-channel PNG. Metric depth is `raw × scale`;
//! a raw value of 0 marks an invalid pixel.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use super::png::{decode_png, encode_png};
use super::{read_bytes, write_bytes, FormatError};
use crate::raster::DepthMap;

pub fn decode_depth(bytes: &[u8], depth_scale: f64) -> Result<DepthMap, FormatError> {
    check_scale(depth_scale)?;
    let img = match decode_png(bytes)? {
        DynamicImage::ImageLuma16(img) => img,
        other => {
            return Err(FormatError::UnsupportedBitDepth(format!(
                "depth must be 16-bit single channel, found {:?}",
                other.color()
            )))
        }
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .as_raw()
        .iter()
        .map(|&raw| if raw == 0 { 0.0 } else { raw as f64 * depth_scale })
        .collect();
    Ok(DepthMap::new(w, h, data))
}

/// Quantizes to the nearest raw unit. Invalid pixels are written as 0;
/// depths that do not fit in 16 bits are rejected.
pub fn encode_depth(depth: &DepthMap, depth_scale: f64) -> Result<Vec<u8>, FormatError> {
    check_scale(depth_scale)?;
    let mut raw = Vec::with_capacity(depth.data().len());
    for (i, &d) in depth.data().iter().enumerate() {
        if !(d.is_finite() && d > 0.0) {
            raw.push(0u16);
            continue;
        }
        let q = (d / depth_scale).round();
        if !(1.0..=u16::MAX as f64).contains(&q) {
            return Err(FormatError::OutOfRange(format!(
                "depth {d} at pixel {i} not representable with scale {depth_scale}"
            )));
        }
        raw.push(q as u16);
    }
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width() as u32, depth.height() as u32, raw)
            .expect("depth buffer size");
    Ok(encode_png(DynamicImage::ImageLuma16(img)))
}

pub fn read_depth(path: &Path, depth_scale: f64) -> Result<DepthMap, FormatError> {
    decode_depth(&read_bytes(path)?, depth_scale)
}

pub fn write_depth(path: &Path, depth: &DepthMap, depth_scale: f64) -> Result<(), FormatError> {
    write_bytes(path, &encode_depth(depth, depth_scale)?)
}

fn check_scale(scale: f64) -> Result<(), FormatError> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(FormatError::OutOfRange(format!("depth scale {scale}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_and_sentinel() {
        let d = DepthMap::new(2, 1, vec![1.0, 0.0]);
        let bytes = encode_depth(&d, 0.001).unwrap();
        let back = decode_depth(&bytes, 0.001).unwrap();
        assert_eq!(back.get(0, 0), 1.0);
        assert_eq!(back.valid(1, 0), None);
    }

    #[test]
    fn exhaustive_16bit_sweep() {
        // Every raw value 0..=65535 survives depth -> file -> depth -> file.
        let scale = 0.001;
        let data: Vec<f64> = (0..=u16::MAX as u32).map(|r| r as f64 * scale).collect();
        let depth = DepthMap::new(256, 256, data);
        let bytes = encode_depth(&depth, scale).unwrap();
        let back = decode_depth(&bytes, scale).unwrap();
        for (r, (&a, &b)) in depth.data().iter().zip(back.data()).enumerate() {
            assert_eq!(a, b, "raw value {r}");
        }
        assert_eq!(encode_depth(&back, scale).unwrap(), bytes);
    }

    #[test]
    fn rejects_other_layouts_and_ranges() {
        let rgb = image::RgbImage::new(2, 2);
        let bytes = encode_png(DynamicImage::ImageRgb8(rgb));
        assert!(matches!(
            decode_depth(&bytes, 0.001),
            Err(FormatError::UnsupportedBitDepth(_))
        ));
        let far = DepthMap::filled(1, 1, 100.0);
        assert!(matches!(encode_depth(&far, 0.001), Err(FormatError::OutOfRange(_))));
        assert!(matches!(decode_depth(b"\x89PNG", 0.001), Err(FormatError::FileCorrupt(_))));
    }
}
