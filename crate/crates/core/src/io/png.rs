//! 8-bit PNG images: RGB frames and binary masks (0 = static, 255 = dynamic).

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use super::{read_bytes, write_bytes, FormatError};
use crate::raster::BinaryMask;

/// Length-0 IEND chunk with its fixed CRC; every complete PNG ends with it.
const IEND: [u8; 12] = [0, 0, 0, 0, b'I', b'E', b'N', b'D', 0xAE, 0x42, 0x60, 0x82];

pub(crate) fn decode_png(bytes: &[u8]) -> Result<DynamicImage, FormatError> {
    // The decoder stops once pixel data is complete, so a cut inside the
    // trailing chunk would otherwise go unnoticed.
    if !bytes.ends_with(&IEND) {
        return Err(FormatError::FileCorrupt("PNG does not end with an IEND chunk".into()));
    }
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| FormatError::FileCorrupt(e.to_string()))
}

pub(crate) fn encode_png(img: DynamicImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding into memory");
    out.into_inner()
}

pub fn decode_rgb(bytes: &[u8]) -> Result<RgbImage, FormatError> {
    match decode_png(bytes)? {
        DynamicImage::ImageRgb8(img) => Ok(img),
        DynamicImage::ImageRgba8(img) => Ok(DynamicImage::ImageRgba8(img).to_rgb8()),
        DynamicImage::ImageLuma8(img) => Ok(DynamicImage::ImageLuma8(img).to_rgb8()),
        other => Err(FormatError::UnsupportedBitDepth(format!(
            "expected 8-bit color, found {:?}",
            other.color()
        ))),
    }
}

pub fn encode_rgb(img: &RgbImage) -> Vec<u8> {
    encode_png(DynamicImage::ImageRgb8(img.clone()))
}

pub fn read_rgb(path: &Path) -> Result<RgbImage, FormatError> {
    decode_rgb(&read_bytes(path)?)
}

pub fn write_rgb(path: &Path, img: &RgbImage) -> Result<(), FormatError> {
    write_bytes(path, &encode_rgb(img))
}

pub fn decode_mask(bytes: &[u8]) -> Result<BinaryMask, FormatError> {
    let img = match decode_png(bytes)? {
        DynamicImage::ImageLuma8(img) => img,
        other => {
            return Err(FormatError::UnsupportedBitDepth(format!(
                "mask must be 8-bit single channel, found {:?}",
                other.color()
            )))
        }
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = Vec::with_capacity(w * h);
    for (i, px) in img.as_raw().iter().enumerate() {
        match *px {
            0 => data.push(false),
            255 => data.push(true),
            value => {
                return Err(FormatError::NonBinaryMask {
                    value,
                    x: i % w,
                    y: i / w,
                })
            }
        }
    }
    Ok(BinaryMask::from_vec(w, h, data))
}

pub fn encode_mask(mask: &BinaryMask) -> Vec<u8> {
    let raw = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("mask buffer size");
    encode_png(DynamicImage::ImageLuma8(img))
}

pub fn read_mask(path: &Path) -> Result<BinaryMask, FormatError> {
    decode_mask(&read_bytes(path)?)
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<(), FormatError> {
    write_bytes(path, &encode_mask(mask))
}
