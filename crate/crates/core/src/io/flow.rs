//! Middlebury `.flo` optical flow: little-endian `f32` magic 202021.25,
//! `i32` width and height, then row-major interleaved `(du, dv)` `f32`
//! pairs. Components with magnitude above 1e9 (or non-finite) mark unknown
//! flow.

use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use super::{read_bytes, write_bytes, FormatError};
use crate::geometry::FlowField;

pub const FLOW_MAGIC: f32 = 202021.25;
/// Value written for invalid pixels.
pub const UNKNOWN_FLOW: f32 = 1e10;
const UNKNOWN_THRESHOLD: f32 = 1e9;

fn is_unknown(v: f32) -> bool {
    !v.is_finite() || v.abs() > UNKNOWN_THRESHOLD
}

pub fn decode_flow(bytes: &[u8]) -> Result<FlowField, FormatError> {
    if bytes.len() < 12 {
        return Err(FormatError::TruncatedFile {
            expected: 12,
            actual: bytes.len(),
        });
    }
    let magic = LittleEndian::read_f32(&bytes[0..4]);
    if magic != FLOW_MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let w = LittleEndian::read_i32(&bytes[4..8]);
    let h = LittleEndian::read_i32(&bytes[8..12]);
    if w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16 {
        return Err(FormatError::MalformedHeader(format!("flow size {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let n = w * h;
    let expected = 12 + n * 8;
    if bytes.len() < expected {
        return Err(FormatError::TruncatedFile {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(FormatError::FileCorrupt(format!(
            "{} trailing bytes after flow data",
            bytes.len() - expected
        )));
    }
    let mut du = Vec::with_capacity(n);
    let mut dv = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for px in bytes[12..].chunks_exact(8) {
        let a = LittleEndian::read_f32(&px[0..4]);
        let b = LittleEndian::read_f32(&px[4..8]);
        du.push(a);
        dv.push(b);
        valid.push(!is_unknown(a) && !is_unknown(b));
    }
    Ok(FlowField::new(w, h, du, dv, valid))
}

/// Valid pixels are written verbatim; invalid pixels keep their stored
/// values when those already read back as unknown, otherwise they are
/// replaced by [`UNKNOWN_FLOW`].
pub fn encode_flow(flow: &FlowField) -> Vec<u8> {
    let n = flow.width() * flow.height();
    let mut out = vec![0u8; 12 + n * 8];
    LittleEndian::write_f32(&mut out[0..4], FLOW_MAGIC);
    LittleEndian::write_i32(&mut out[4..8], flow.width() as i32);
    LittleEndian::write_i32(&mut out[8..12], flow.height() as i32);
    for i in 0..n {
        let (mut a, mut b) = (flow.du()[i], flow.dv()[i]);
        if !flow.valid()[i] && !(is_unknown(a) || is_unknown(b)) {
            a = UNKNOWN_FLOW;
            b = UNKNOWN_FLOW;
        }
        let off = 12 + i * 8;
        LittleEndian::write_f32(&mut out[off..off + 4], a);
        LittleEndian::write_f32(&mut out[off + 4..off + 8], b);
    }
    out
}

pub fn read_flow(path: &Path) -> Result<FlowField, FormatError> {
    decode_flow(&read_bytes(path)?)
}

pub fn write_flow(path: &Path, flow: &FlowField) -> Result<(), FormatError> {
    write_bytes(path, &encode_flow(flow))
}
