//! Point clouds as PLY with per-vertex `x y z` (double), `red green blue`
//! (uchar), `frame_id` (uint) and `pixel` (uint, row-major index of the
//! source pixel).
//!
//! The reader accepts ASCII and binary little-endian files, any numeric
//! type for each property, and files without `pixel` (reported as
//! [`CloudPoint::NO_PIXEL`]). Other elements must follow the vertex
//! element and are ignored.

use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use super::{read_bytes, write_bytes, FormatError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub position: [f64; 3],
    pub color: [u8; 3],
    pub frame_id: u32,
    pub pixel: u32,
}

impl CloudPoint {
    pub const NO_PIXEL: u32 = u32::MAX;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => LittleEndian::read_i16(b) as f64,
            Scalar::U16 => LittleEndian::read_u16(b) as f64,
            Scalar::I32 => LittleEndian::read_i32(b) as f64,
            Scalar::U32 => LittleEndian::read_u32(b) as f64,
            Scalar::F32 => LittleEndian::read_f32(b) as f64,
            Scalar::F64 => LittleEndian::read_f64(b),
        }
    }
}

struct Header {
    encoding: PlyEncoding,
    vertex_count: usize,
    properties: Vec<(String, Scalar)>,
    body_offset: usize,
}

const REQUIRED: [&str; 7] = ["x", "y", "z", "red", "green", "blue", "frame_id"];

fn parse_header(bytes: &[u8]) -> Result<Header, FormatError> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| FormatError::MalformedHeader("missing end_header".into()))?;
    let text = std::str::from_utf8(&bytes[..end])
        .map_err(|_| FormatError::MalformedHeader("header is not ASCII".into()))?;
    let mut lines = text.lines();
    if lines.next() != Some("ply") {
        return Err(FormatError::MalformedHeader("missing ply magic".into()));
    }
    let mut encoding = None;
    let mut vertex_count = None;
    let mut properties = Vec::new();
    let mut in_vertex = false;
    let mut seen_other = false;
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", "1.0"] => encoding = Some(PlyEncoding::Ascii),
            ["format", "binary_little_endian", "1.0"] => {
                encoding = Some(PlyEncoding::BinaryLittleEndian)
            }
            ["format", other, ..] => {
                return Err(FormatError::MalformedHeader(format!("unsupported format {other}")))
            }
            ["element", "vertex", n] => {
                if vertex_count.is_some() || seen_other {
                    return Err(FormatError::MalformedHeader(
                        "vertex must be the first element".into(),
                    ));
                }
                vertex_count = Some(n.parse::<usize>().map_err(|_| {
                    FormatError::MalformedHeader(format!("bad vertex count {n}"))
                })?);
                in_vertex = true;
            }
            ["element", ..] => {
                if vertex_count.is_none() {
                    return Err(FormatError::MalformedHeader(
                        "vertex must be the first element".into(),
                    ));
                }
                in_vertex = false;
                seen_other = true;
            }
            ["property", "list", ..] if in_vertex => {
                return Err(FormatError::MalformedHeader("list property on vertex".into()))
            }
            ["property", ty, name] if in_vertex => {
                let scalar = Scalar::parse(ty)
                    .ok_or_else(|| FormatError::MalformedHeader(format!("unknown type {ty}")))?;
                properties.push((name.to_string(), scalar));
            }
            ["property", ..] => {}
            _ => return Err(FormatError::MalformedHeader(format!("unexpected line {line:?}"))),
        }
    }
    let encoding = encoding.ok_or_else(|| FormatError::MalformedHeader("missing format".into()))?;
    let vertex_count =
        vertex_count.ok_or_else(|| FormatError::MalformedHeader("missing vertex element".into()))?;
    for name in REQUIRED {
        if !properties.iter().any(|(n, _)| n == name) {
            return Err(FormatError::MalformedHeader(format!("missing property {name}")));
        }
    }
    Ok(Header {
        encoding,
        vertex_count,
        properties,
        body_offset: end + END.len(),
    })
}

fn to_point(header: &Header, values: &[f64]) -> Result<CloudPoint, FormatError> {
    let get = |name: &str| {
        header
            .properties
            .iter()
            .position(|(n, _)| n == name)
            .map(|i| values[i])
    };
    let channel = |name: &str| -> Result<u8, FormatError> {
        let v = get(name).unwrap_or(0.0);
        if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
            Ok(v as u8)
        } else {
            Err(FormatError::FileCorrupt(format!("{name} value {v}")))
        }
    };
    let index = |name: &str, default: Option<u32>| -> Result<u32, FormatError> {
        match get(name) {
            Some(v) if v.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&v) => Ok(v as u32),
            Some(v) => Err(FormatError::FileCorrupt(format!("{name} value {v}"))),
            None => default.ok_or_else(|| FormatError::MalformedHeader(format!("missing {name}"))),
        }
    };
    let position = [get("x").unwrap(), get("y").unwrap(), get("z").unwrap()];
    if !position.iter().all(|v| v.is_finite()) {
        return Err(FormatError::FileCorrupt("non-finite coordinate".into()));
    }
    Ok(CloudPoint {
        position,
        color: [channel("red")?, channel("green")?, channel("blue")?],
        frame_id: index("frame_id", None)?,
        pixel: index("pixel", Some(CloudPoint::NO_PIXEL))?,
    })
}

pub fn decode_pointcloud(bytes: &[u8]) -> Result<Vec<CloudPoint>, FormatError> {
    let header = parse_header(bytes)?;
    let body = &bytes[header.body_offset..];
    let nprops = header.properties.len();
    let mut points = Vec::with_capacity(header.vertex_count.min(1 << 20));
    let mut values = vec![0.0f64; nprops];
    match header.encoding {
        PlyEncoding::BinaryLittleEndian => {
            let stride: usize = header.properties.iter().map(|(_, s)| s.size()).sum();
            let expected = stride
                .checked_mul(header.vertex_count)
                .ok_or_else(|| FormatError::MalformedHeader("vertex count overflow".into()))?;
            if body.len() < expected {
                return Err(FormatError::TruncatedFile {
                    expected: header.body_offset + expected,
                    actual: bytes.len(),
                });
            }
            for rec in body[..expected].chunks_exact(stride.max(1)).take(header.vertex_count) {
                let mut off = 0;
                for (slot, (_, s)) in values.iter_mut().zip(&header.properties) {
                    *slot = s.read_le(&rec[off..off + s.size()]);
                    off += s.size();
                }
                points.push(to_point(&header, &values)?);
            }
        }
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(body)
                .map_err(|_| FormatError::FileCorrupt("non-ASCII body".into()))?;
            let mut lines = text.lines();
            for i in 0..header.vertex_count {
                let line = lines.next().ok_or(FormatError::TruncatedFile {
                    expected: header.vertex_count,
                    actual: i,
                })?;
                let tok: Vec<&str> = line.split_whitespace().collect();
                if tok.len() != nprops {
                    return Err(FormatError::FileCorrupt(format!(
                        "vertex {i}: expected {nprops} values, found {}",
                        tok.len()
                    )));
                }
                for (slot, t) in values.iter_mut().zip(tok) {
                    *slot = t
                        .parse()
                        .map_err(|_| FormatError::FileCorrupt(format!("vertex {i}: bad value {t}")))?;
                }
                points.push(to_point(&header, &values)?);
            }
            // A cut inside the last line still parses as a shorter number.
            if header.vertex_count > 0 && !text.ends_with('\n') {
                return Err(FormatError::TruncatedFile {
                    expected: body.len() + 1,
                    actual: body.len(),
                });
            }
        }
    }
    Ok(points)
}

pub fn encode_pointcloud(points: &[CloudPoint], encoding: PlyEncoding) -> Vec<u8> {
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {format} 1.0\ncomment scenemem point cloud\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\n\
         property uint frame_id\nproperty uint pixel\nend_header\n",
        points.len()
    )
    .into_bytes();
    match encoding {
        PlyEncoding::BinaryLittleEndian => {
            let mut rec = [0u8; 35];
            for p in points {
                LittleEndian::write_f64(&mut rec[0..8], p.position[0]);
                LittleEndian::write_f64(&mut rec[8..16], p.position[1]);
                LittleEndian::write_f64(&mut rec[16..24], p.position[2]);
                rec[24..27].copy_from_slice(&p.color);
                LittleEndian::write_u32(&mut rec[27..31], p.frame_id);
                LittleEndian::write_u32(&mut rec[31..35], p.pixel);
                out.extend_from_slice(&rec);
            }
        }
        PlyEncoding::Ascii => {
            for p in points {
                let [x, y, z] = p.position;
                let [r, g, b] = p.color;
                out.extend_from_slice(
                    format!("{x:?} {y:?} {z:?} {r} {g} {b} {} {}\n", p.frame_id, p.pixel).as_bytes(),
                );
            }
        }
    }
    out
}

pub fn read_pointcloud(path: &Path) -> Result<Vec<CloudPoint>, FormatError> {
    decode_pointcloud(&read_bytes(path)?)
}

pub fn write_pointcloud(
    path: &Path,
    points: &[CloudPoint],
    encoding: PlyEncoding,
) -> Result<(), FormatError> {
    if let Some(p) = points.iter().find(|p| !p.position.iter().all(|v| v.is_finite())) {
        return Err(FormatError::OutOfRange(format!("non-finite point {:?}", p.position)));
    }
    write_bytes(path, &encode_pointcloud(points, encoding))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Vec<CloudPoint> {
        vec![
            CloudPoint { position: [0.1, -2.5, 3.0e-7], color: [1, 2, 3], frame_id: 0, pixel: 5 },
            CloudPoint { position: [1.0 / 3.0, 7.0, -0.0], color: [255, 0, 128], frame_id: 2, pixel: 0 },
            CloudPoint { position: [1e10, 2.0, 3.0], color: [9, 9, 9], frame_id: 2, pixel: 77 },
        ]
    }

    #[test]
    fn empty_cloud() {
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let bytes = encode_pointcloud(&[], enc);
            assert!(std::str::from_utf8(&bytes).unwrap().contains("element vertex 0\n"));
            assert!(decode_pointcloud(&bytes).unwrap().is_empty());
        }
    }

    #[test]
    fn three_points_bit_exact_both_encodings() {
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let bytes = encode_pointcloud(&sample(), enc);
            let back = decode_pointcloud(&bytes).unwrap();
            for (a, b) in sample().iter().zip(&back) {
                for k in 0..3 {
                    assert_eq!(a.position[k].to_bits(), b.position[k].to_bits());
                }
                assert_eq!((a.color, a.frame_id, a.pixel), (b.color, b.frame_id, b.pixel));
            }
            assert_eq!(encode_pointcloud(&back, enc), bytes);
        }
    }

    #[test]
    fn frame_tags_regroup() {
        let back = decode_pointcloud(&encode_pointcloud(&sample(), PlyEncoding::BinaryLittleEndian)).unwrap();
        let frame2: Vec<u32> = back.iter().filter(|p| p.frame_id == 2).map(|p| p.pixel).collect();
        assert_eq!(frame2, vec![0, 77]);
        assert_eq!(back.iter().filter(|p| p.frame_id == 0).count(), 1);
    }

    #[test]
    fn foreign_file_with_float_coords_and_no_pixel() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n\
                    property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n\
                    property int frame_id\nelement face 0\nproperty list uchar int vertex_indices\n\
                    end_header\n0.5 1 2 10 20 30 4\n";
        let pts = decode_pointcloud(text.as_bytes()).unwrap();
        assert_eq!(pts[0].position, [0.5, 1.0, 2.0]);
        assert_eq!(pts[0].pixel, CloudPoint::NO_PIXEL);
        assert_eq!(pts[0].frame_id, 4);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(decode_pointcloud(b"ply\nformat ascii 1.0\n"), Err(FormatError::MalformedHeader(_))));
        let missing = "ply\nformat ascii 1.0\nelement vertex 0\nproperty double x\nend_header\n";
        assert!(matches!(decode_pointcloud(missing.as_bytes()), Err(FormatError::MalformedHeader(_))));
    }

    #[test]
    fn every_truncation_is_typed() {
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let bytes = encode_pointcloud(&sample(), enc);
            for cut in 0..bytes.len() {
                assert!(decode_pointcloud(&bytes[..cut]).is_err(), "cut {cut} {enc:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn binary_round_trip(pts in prop::collection::vec(
            (prop::array::uniform3(-1e6f64..1e6), prop::array::uniform3(any::<u8>()), any::<u32>(), any::<u32>()),
            0..40,
        )) {
            let cloud: Vec<CloudPoint> = pts.into_iter()
                .map(|(position, color, frame_id, pixel)| CloudPoint { position, color, frame_id, pixel })
                .collect();
            let bytes = encode_pointcloud(&cloud, PlyEncoding::BinaryLittleEndian);
            prop_assert_eq!(decode_pointcloud(&bytes).unwrap(), cloud);
        }
    }
}
