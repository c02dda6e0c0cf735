//! Static-only point memory built from masked RGB-D frames.
//!
//! Points stay grouped by the frame they were lifted from, so retrieval can
//! pull exactly the frames it ranks highest.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::{unproject, CameraIntrinsics, CameraPose, GeometryError};
use crate::io::{check_terminated, 
    read_pointcloud, read_text, read_trajectory, records_from_poses, write_bytes,
    write_pointcloud, write_trajectory, CloudPoint, FormatError, PlyEncoding, Sequence,
};
use crate::par::{map_range, Execution};
use crate::raster::BinaryMask;

pub const MEMORY_HEADER: &str = "scenemem-memory";
pub const MEMORY_SCHEMA: u32 = 1;
pub const POINTS_FILE: &str = "points.ply";
pub const TRAJECTORY_FILE: &str = "trajectory.txt";
pub const META_FILE: &str = "memory.meta";

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("got {actual} masks for {expected} frames")]
    MaskCountMismatch { expected: usize, actual: usize },
    #[error("mask {frame} is {actual:?}, frames are {expected:?}")]
    DimensionMismatch {
        frame: usize,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("no static points survived fusion")]
    EmptyMemory,
    #[error("frame {frame} out of range (memory has {count} frames)")]
    FrameOutOfRange { frame: usize, count: usize },
    #[error("memory schema mismatch: {0}")]
    SchemaVersionMismatch(String),
    #[error("invalid fusion setting: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl MemoryError {
    pub fn is_io(&self) -> bool {
        matches!(self, MemoryError::Format(e) if e.is_io())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Edge length of the per-frame dedup grid; 0 disables it.
    pub voxel_size: f64,
    /// Relative depth jump to a 4-neighbour above which a pixel is skipped.
    /// `None` keeps every pixel.
    pub edge_threshold: Option<f64>,
    pub exec: Execution,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            voxel_size: 0.0,
            edge_threshold: Some(0.10),
            exec: Execution::Parallel,
        }
    }
}

impl FusionConfig {
    fn validate(&self) -> Result<(), MemoryError> {
        if !(self.voxel_size >= 0.0 && self.voxel_size.is_finite()) {
            return Err(MemoryError::InvalidConfig(format!(
                "voxel size {} must be a non-negative number",
                self.voxel_size
            )));
        }
        if let Some(t) = self.edge_threshold {
            if !(t > 0.0 && t.is_finite()) {
                return Err(MemoryError::InvalidConfig(format!(
                    "edge threshold {t} must be positive"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneMemory {
    pub intrinsics: CameraIntrinsics,
    pub poses: Vec<CameraPose>,
    /// `frames[i]` holds the points lifted from frame `i`, in pixel order.
    pub frames: Vec<Vec<CloudPoint>>,
    pub voxel_size: f64,
    pub edge_threshold: Option<f64>,
}

impl SceneMemory {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn point_count(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    pub fn frame_points(&self, frame: usize) -> Result<&[CloudPoint], MemoryError> {
        self.frames
            .get(frame)
            .map(Vec::as_slice)
            .ok_or(MemoryError::FrameOutOfRange {
                frame,
                count: self.frames.len(),
            })
    }

    /// Points of the named frames, ordered by (frame, pixel). Duplicate ids
    /// count once.
    pub fn frame_subset(&self, ids: &[usize]) -> Result<Vec<CloudPoint>, MemoryError> {
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mut out = Vec::new();
        for id in ids {
            out.extend_from_slice(self.frame_points(id)?);
        }
        Ok(out)
    }

    /// Every stored point, ordered by (frame, pixel).
    pub fn all_points(&self) -> Vec<CloudPoint> {
        self.frames.concat()
    }
}

fn is_depth_edge(seq: &Sequence, frame: usize, x: usize, y: usize, d: f64, t: f64) -> bool {
    let depth = &seq.frames[frame].depth;
    let (w, h) = (depth.width(), depth.height());
    let neighbours = [
        (x > 0).then(|| (x - 1, y)),
        (x + 1 < w).then(|| (x + 1, y)),
        (y > 0).then(|| (x, y - 1)),
        (y + 1 < h).then(|| (x, y + 1)),
    ];
    neighbours
        .into_iter()
        .flatten()
        .filter_map(|(nx, ny)| depth.valid(nx, ny))
        .any(|dn| (dn - d).abs() > t * d)
}

fn voxel_dedup(points: Vec<CloudPoint>, size: f64) -> Vec<CloudPoint> {
    if size == 0.0 {
        return points;
    }
    let mut seen = HashSet::new();
    points
        .into_iter()
        .filter(|p| {
            let key = p.position.map(|c| (c / size).floor() as i64);
            seen.insert(key)
        })
        .collect()
}

fn lift_frame(
    seq: &Sequence,
    frame: usize,
    mask: Option<&BinaryMask>,
    cfg: &FusionConfig,
) -> Result<Vec<CloudPoint>, MemoryError> {
    let k = &seq.intrinsics;
    let f = &seq.frames[frame];
    let (r, c) = seq.poses[frame].camera_to_world();
    let mut points = Vec::new();
    for y in 0..k.height {
        for x in 0..k.width {
            if mask.is_some_and(|m| m.get(x, y)) {
                continue;
            }
            let Some(d) = f.depth.valid(x, y) else { continue };
            if cfg
                .edge_threshold
                .is_some_and(|t| is_depth_edge(seq, frame, x, y, d, t))
            {
                continue;
            }
            let p_cam = unproject(x as f64 + 0.5, y as f64 + 0.5, d, k)?;
            let p = r * p_cam + c;
            let rgb = f.rgb.get_pixel(x as u32, y as u32).0;
            points.push(CloudPoint {
                position: [p.x, p.y, p.z],
                color: rgb,
                frame_id: frame as u32,
                pixel: (y * k.width + x) as u32,
            });
        }
    }
    Ok(voxel_dedup(points, cfg.voxel_size))
}

/// Lifts every valid, non-edge pixel that `masks` marks static into world
/// coordinates. `masks = None` treats every pixel as static.
pub fn fuse_static(
    seq: &Sequence,
    masks: Option<&[BinaryMask]>,
    cfg: &FusionConfig,
) -> Result<SceneMemory, MemoryError> {
    cfg.validate()?;
    let n = seq.len();
    let k = seq.intrinsics;
    if let Some(m) = masks {
        if m.len() != n {
            return Err(MemoryError::MaskCountMismatch {
                expected: n,
                actual: m.len(),
            });
        }
        if let Some((frame, bad)) = m
            .iter()
            .enumerate()
            .find(|(_, m)| m.dims() != (k.width, k.height))
        {
            return Err(MemoryError::DimensionMismatch {
                frame,
                expected: (k.width, k.height),
                actual: bad.dims(),
            });
        }
    }
    let frames = map_range(cfg.exec, n, |i| {
        lift_frame(seq, i, masks.map(|m| &m[i]), cfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    if frames.iter().all(Vec::is_empty) {
        return Err(MemoryError::EmptyMemory);
    }
    Ok(SceneMemory {
        intrinsics: k,
        poses: seq.poses.clone(),
        frames,
        voxel_size: cfg.voxel_size,
        edge_threshold: cfg.edge_threshold,
    })
}

fn meta_text(m: &SceneMemory) -> String {
    let k = &m.intrinsics;
    let edge = m
        .edge_threshold
        .map_or_else(|| "none".to_string(), |t| t.to_string());
    format!(
        "{MEMORY_HEADER} {MEMORY_SCHEMA}\n\
         intrinsics {} {} {} {} {} {}\n\
         frame_count {}\n\
         voxel_size {}\n\
         edge_threshold {edge}\n",
        k.fx,
        k.fy,
        k.cx,
        k.cy,
        k.width,
        k.height,
        m.frames.len(),
        m.voxel_size,
    )
}

struct Meta {
    intrinsics: CameraIntrinsics,
    frame_count: usize,
    voxel_size: f64,
    edge_threshold: Option<f64>,
}

fn parse_meta(text: &str) -> Result<Meta, MemoryError> {
    let bad = |m: String| MemoryError::SchemaVersionMismatch(m);
    check_terminated(text)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().unwrap_or_default();
    let expected = format!("{MEMORY_HEADER} {MEMORY_SCHEMA}");
    if header.trim() != expected {
        return Err(bad(format!("expected '{expected}', found '{}'", header.trim())));
    }
    let (mut k, mut count, mut voxel, mut edge) = (None, None, None, None);
    for line in lines {
        let mut it = line.split_whitespace();
        let key = it.next().unwrap_or_default();
        let vals: Vec<&str> = it.collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number '{s}' in '{line}'")));
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad integer '{s}' in '{line}'")));
        let arity = |n: usize| {
            if vals.len() == n {
                Ok(())
            } else {
                Err(bad(format!("'{key}' takes {n} values")))
            }
        };
        match key {
            "intrinsics" => {
                arity(6)?;
                k = Some(CameraIntrinsics::new(
                    num(vals[0])?,
                    num(vals[1])?,
                    num(vals[2])?,
                    num(vals[3])?,
                    int(vals[4])?,
                    int(vals[5])?,
                )?);
            }
            "frame_count" => {
                arity(1)?;
                count = Some(int(vals[0])?);
            }
            "voxel_size" => {
                arity(1)?;
                voxel = Some(num(vals[0])?);
            }
            "edge_threshold" => {
                arity(1)?;
                edge = Some(match vals[0] {
                    "none" => None,
                    v => Some(num(v)?),
                });
            }
            other => return Err(bad(format!("unknown key '{other}'"))),
        }
    }
    Ok(Meta {
        intrinsics: k.ok_or_else(|| bad("missing intrinsics".into()))?,
        frame_count: count.ok_or_else(|| bad("missing frame_count".into()))?,
        voxel_size: voxel.ok_or_else(|| bad("missing voxel_size".into()))?,
        edge_threshold: edge.ok_or_else(|| bad("missing edge_threshold".into()))?,
    })
}

/// Writes `points.ply`, `trajectory.txt` and `memory.meta` into `dir`.
pub fn save_memory(memory: &SceneMemory, dir: &Path) -> Result<(), MemoryError> {
    write_pointcloud(
        &dir.join(POINTS_FILE),
        &memory.all_points(),
        PlyEncoding::BinaryLittleEndian,
    )?;
    write_trajectory(&dir.join(TRAJECTORY_FILE), &records_from_poses(&memory.poses))?;
    write_bytes(&dir.join(META_FILE), meta_text(memory).as_bytes())?;
    Ok(())
}

/// Reads a directory written by [`save_memory`]. All three files are read
/// and cross-checked before anything is returned.
pub fn load_memory(dir: &Path) -> Result<SceneMemory, MemoryError> {
    let meta = parse_meta(&read_text(&dir.join(META_FILE))?)?;
    let records = read_trajectory(&dir.join(TRAJECTORY_FILE))?;
    if records.len() != meta.frame_count || records.iter().enumerate().any(|(i, r)| r.index() != i) {
        return Err(MemoryError::SchemaVersionMismatch(format!(
            "trajectory does not list frames 0..{}",
            meta.frame_count
        )));
    }
    let points = read_pointcloud(&dir.join(POINTS_FILE))?;
    let mut frames = vec![Vec::new(); meta.frame_count];
    for p in points {
        let f = p.frame_id as usize;
        let slot = frames.get_mut(f).ok_or(MemoryError::FrameOutOfRange {
            frame: f,
            count: meta.frame_count,
        })?;
        slot.push(p);
    }
    Ok(SceneMemory {
        intrinsics: meta.intrinsics,
        poses: records.iter().map(|r| *r.pose()).collect(),
        frames,
        voxel_size: meta.voxel_size,
        edge_threshold: meta.edge_threshold,
    })
}

/// World-space position of a stored point.
pub fn point_position(p: &CloudPoint) -> Vector3<f64> {
    Vector3::from(p.position)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::Frame;
    use crate::raster::DepthMap;
    use crate::synth::{generate, moving_box, static_room};
    use image::RgbImage;

    fn flat_sequence(n: usize, depth: f64) -> Sequence {
        let k = CameraIntrinsics::new(10.0, 10.0, 4.0, 3.0, 8, 6).unwrap();
        Sequence {
            intrinsics: k,
            depth_scale: 0.001,
            poses: (0..n)
                .map(|i| CameraPose::from_axis_angle(Vector3::y(), 0.1 * i as f64, Vector3::new(i as f64, 0.0, 0.0)))
                .collect(),
            frames: (0..n)
                .map(|i| Frame {
                    rgb: RgbImage::from_fn(8, 6, |x, y| image::Rgb([x as u8, y as u8, i as u8])),
                    depth: DepthMap::filled(8, 6, depth),
                    flow: None,
                    backward_flow: None,
                    mask: None,
                })
                .collect(),
        }
    }

    #[test]
    fn identity_single_frame() {
        let mut seq = flat_sequence(1, 1.0);
        seq.poses[0] = CameraPose::identity();
        let m = fuse_static(&seq, None, &FusionConfig::default()).unwrap();
        assert_eq!(m.point_count(), 48);
        let p = &m.frames[0][0];
        let expect = unproject(0.5, 0.5, 1.0, &seq.intrinsics).unwrap();
        assert_eq!(point_position(p), expect);
    }

    #[test]
    fn all_dynamic_is_empty() {
        let seq = flat_sequence(2, 1.0);
        let masks = vec![BinaryMask::from_fn(8, 6, |_, _| true); 2];
        assert!(matches!(
            fuse_static(&seq, Some(&masks), &FusionConfig::default()),
            Err(MemoryError::EmptyMemory)
        ));
        assert!(matches!(
            fuse_static(&seq, Some(&masks[..1]), &FusionConfig::default()),
            Err(MemoryError::MaskCountMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn masked_pixels_never_fused() {
        let out = generate(&moving_box(0), Execution::Parallel).unwrap();
        let masks = &out.object_masks;
        let m = fuse_static(&out.sequence, Some(masks), &FusionConfig::default()).unwrap();
        let w = out.sequence.intrinsics.width;
        for (f, pts) in m.frames.iter().enumerate() {
            for p in pts {
                let px = p.pixel as usize;
                assert!(!masks[f].get(px % w, px / w));
                assert_eq!(p.frame_id as usize, f);
            }
        }
    }

    #[test]
    fn count_matches_static_pixels_without_filters() {
        let out = generate(&moving_box(1), Execution::Parallel).unwrap();
        let cfg = FusionConfig {
            edge_threshold: None,
            ..FusionConfig::default()
        };
        let masks = &out.object_masks;
        let m = fuse_static(&out.sequence, Some(masks), &cfg).unwrap();
        let expected: usize = out
            .sequence
            .frames
            .iter()
            .zip(masks)
            .map(|(f, mask)| {
                let k = &out.sequence.intrinsics;
                (0..k.height)
                    .flat_map(|y| (0..k.width).map(move |x| (x, y)))
                    .filter(|&(x, y)| !mask.get(x, y) && f.depth.valid(x, y).is_some())
                    .count()
            })
            .sum();
        assert_eq!(m.point_count(), expected);
    }

    #[test]
    fn voxel_dedup_keeps_existing_points() {
        let out = generate(&static_room(0), Execution::Parallel).unwrap();
        let raw = fuse_static(&out.sequence, None, &FusionConfig::default()).unwrap();
        let cfg = FusionConfig {
            voxel_size: 0.1,
            ..FusionConfig::default()
        };
        let down = fuse_static(&out.sequence, None, &cfg).unwrap();
        assert!(down.point_count() < raw.point_count());
        for (a, b) in down.frames.iter().zip(&raw.frames) {
            for p in a {
                assert!(b.contains(p));
            }
        }
    }

    #[test]
    fn rigid_equivariance() {
        let seq = flat_sequence(3, 2.0);
        let g = CameraPose::from_axis_angle(Vector3::new(0.3, 1.0, -0.2).normalize(), 0.7, Vector3::new(1.0, -2.0, 0.5));
        let mut moved = seq.clone();
        let g_inv = g.inverse();
        for p in &mut moved.poses {
            *p = p.compose(&g_inv);
        }
        let cfg = FusionConfig::default();
        let a = fuse_static(&seq, None, &cfg).unwrap();
        let b = fuse_static(&moved, None, &cfg).unwrap();
        for (pa, pb) in a.all_points().iter().zip(b.all_points()) {
            let expect = g.transform_point(&point_position(pa));
            assert!((expect - point_position(&pb)).norm() < 1e-9);
        }
    }

    #[test]
    fn subset_union() {
        let seq = flat_sequence(3, 1.0);
        let m = fuse_static(&seq, None, &FusionConfig::default()).unwrap();
        assert_eq!(m.frame_subset(&[0, 1, 2]).unwrap(), m.all_points());
        assert!(m.frame_subset(&[]).unwrap().is_empty());
        let mut ij = m.frame_subset(&[0]).unwrap();
        ij.extend(m.frame_subset(&[2]).unwrap());
        assert_eq!(m.frame_subset(&[2, 0]).unwrap(), ij);
        assert!(matches!(m.frame_subset(&[3]), Err(MemoryError::FrameOutOfRange { frame: 3, count: 3 })));
    }

    #[test]
    fn save_load_round_trip() {
        let seq = flat_sequence(3, 1.5);
        let cfg = FusionConfig {
            voxel_size: 0.05,
            ..FusionConfig::default()
        };
        let m = fuse_static(&seq, None, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_memory(&m, dir.path()).unwrap();
        let back = load_memory(dir.path()).unwrap();
        assert_eq!(back.frames, m.frames);
        assert_eq!(back.voxel_size, 0.05);
        assert_eq!(back.edge_threshold, m.edge_threshold);
        assert_eq!(back.intrinsics, m.intrinsics);
        for (a, b) in back.poses.iter().zip(&m.poses) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
        std::fs::remove_file(dir.path().join(TRAJECTORY_FILE)).unwrap();
        assert!(load_memory(dir.path()).unwrap_err().is_io());
    }

    #[test]
    fn schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(META_FILE), "scenemem-memory 2\n").unwrap();
        assert!(matches!(load_memory(dir.path()), Err(MemoryError::SchemaVersionMismatch(_))));
    }
}
