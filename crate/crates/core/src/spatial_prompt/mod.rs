//! Retrieval of the stored frames that best cover a target view, and
//! z-buffered splatting of their points into that view.

mod bundle;

use image::RgbImage;
use thiserror::Error;

pub use bundle::{
    assemble_conditioning, read_bundle_index, write_bundle, BundleEntry, BundleIndex, BundleRole,
    ConditioningBundle, BUNDLE_HEADER, BUNDLE_INDEX,
};

use crate::geometry::{CameraIntrinsics, CameraPose};
use crate::io::{CloudPoint, FormatError};
use crate::par::{map_range, Execution};
use crate::raster::{BinaryMask, DepthMap};
use crate::scene_memory::{point_position, MemoryError, SceneMemory};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("frame {frame} out of range (memory has {count} frames)")]
    FrameOutOfRange { frame: usize, count: usize },
    #[error("scene memory holds no points")]
    EmptyMemory,
    #[error("need at least {need} input frames, have {have}")]
    InsufficientFrames { need: usize, have: usize },
    #[error("invalid prompt setting: {0}")]
    InvalidConfig(String),
    #[error("malformed bundle index: {0}")]
    MalformedIndex(String),
    #[error(transparent)]
    Memory(MemoryError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl From<MemoryError> for PromptError {
    fn from(e: MemoryError) -> Self {
        match e {
            MemoryError::FrameOutOfRange { frame, count } => PromptError::FrameOutOfRange { frame, count },
            MemoryError::EmptyMemory => PromptError::EmptyMemory,
            other => PromptError::Memory(other),
        }
    }
}

impl PromptError {
    pub fn is_io(&self) -> bool {
        match self {
            PromptError::Format(e) => e.is_io(),
            PromptError::Memory(e) => e.is_io(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptConfig {
    /// Frames retrieved per target.
    pub n: usize,
    /// Splat half-width in pixels.
    pub radius: usize,
    /// Rank frames once against all targets instead of per target.
    pub shared_topn: bool,
    pub exec: Execution,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            n: 7,
            radius: 0,
            shared_topn: false,
            exec: Execution::Parallel,
        }
    }
}

impl PromptConfig {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.n == 0 {
            return Err(PromptError::InvalidConfig("n must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPrompt {
    pub rgb: RgbImage,
    /// Target-camera depth; 0 where nothing was splatted.
    pub depth: DepthMap,
    pub valid: BinaryMask,
    pub target: CameraPose,
    pub frames: Vec<usize>,
}

impl SpatialPrompt {
    pub fn coverage(&self) -> f64 {
        self.valid.count() as f64 / (self.valid.width() * self.valid.height()) as f64
    }
}

fn projects_into(p: &CloudPoint, target: &CameraPose, k: &CameraIntrinsics) -> bool {
    let q = target.transform_point(&point_position(p));
    if !(q.z > 0.0) {
        return false;
    }
    let (u, v) = (k.fx * q.x / q.z + k.cx, k.fy * q.y / q.z + k.cy);
    u >= 0.0 && v >= 0.0 && u < k.width as f64 && v < k.height as f64
}

/// Fraction of `frame`'s points that land inside the target image in front
/// of the camera. An empty frame scores 0.
pub fn fov_overlap(
    memory: &SceneMemory,
    frame: usize,
    target: &CameraPose,
    k: &CameraIntrinsics,
) -> Result<f64, PromptError> {
    let pts = memory.frame_points(frame)?;
    if pts.is_empty() {
        return Ok(0.0);
    }
    let hits = pts.iter().filter(|p| projects_into(p, target, k)).count();
    Ok(hits as f64 / pts.len() as f64)
}

/// Descending score; equal scores go to the stored camera nearer the
/// target(s), then to the smaller id.
fn rank(scores: &[f64], dist: &[f64], n: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..scores.len()).collect();
    ids.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(dist[a].total_cmp(&dist[b]))
            .then(a.cmp(&b))
    });
    ids.truncate(n);
    ids
}

/// Distance from each stored camera center to the nearest target center,
/// rounded to a nanometre so that equal spacings compare equal.
fn center_distances(memory: &SceneMemory, targets: &[CameraPose]) -> Vec<f64> {
    memory
        .poses
        .iter()
        .map(|p| {
            let c = p.center();
            let d = targets
                .iter()
                .map(|t| (t.center() - c).norm())
                .fold(f64::INFINITY, f64::min);
            (d * 1e9).round()
        })
        .collect()
}

/// Frame ids ordered by descending overlap with `target`. Ties go to the
/// frame whose camera center is nearer the target, then to the smaller id.
/// Returns every frame when the memory has fewer than `n`.
pub fn select_top_n(
    memory: &SceneMemory,
    target: &CameraPose,
    k: &CameraIntrinsics,
    n: usize,
) -> Vec<usize> {
    let scores: Vec<f64> = (0..memory.frame_count())
        .map(|f| fov_overlap(memory, f, target, k).unwrap_or(0.0))
        .collect();
    let dist = center_distances(memory, &[*target]);
    rank(&scores, &dist, n)
}

/// Top-n by overlap averaged over all `targets`.
pub fn select_shared_top_n(
    memory: &SceneMemory,
    targets: &[CameraPose],
    k: &CameraIntrinsics,
    n: usize,
) -> Vec<usize> {
    let scores: Vec<f64> = (0..memory.frame_count())
        .map(|f| {
            targets
                .iter()
                .map(|t| fov_overlap(memory, f, t, k).unwrap_or(0.0))
                .sum::<f64>()
        })
        .collect();
    rank(&scores, &center_distances(memory, targets), n)
}

/// Depth, frame, pixel and color of the nearest splat at a pixel.
type Splat = (f64, u32, u32, [u8; 3]);

/// Z-buffered square splats of `points` seen from `target`. Each pixel keeps
/// the splat with the smallest (depth, frame, pixel), so the output does not
/// depend on point order.
pub fn splat_points(
    points: &[CloudPoint],
    target: &CameraPose,
    k: &CameraIntrinsics,
    radius: usize,
) -> (RgbImage, DepthMap, BinaryMask) {
    let (w, h) = (k.width, k.height);
    let mut zbuf: Vec<Option<Splat>> = vec![None; w * h];
    let r = radius as i64;
    for p in points {
        let q = target.transform_point(&point_position(p));
        if !(q.z > 0.0) {
            continue;
        }
        let (u, v) = (k.fx * q.x / q.z + k.cx, k.fy * q.y / q.z + k.cy);
        if !(u.is_finite() && v.is_finite()) {
            continue;
        }
        let (cx, cy) = (u.floor(), v.floor());
        if cx < -(r as f64) || cy < -(r as f64) || cx >= (w as i64 + r) as f64 || cy >= (h as i64 + r) as f64 {
            continue;
        }
        let (cx, cy) = (cx as i64, cy as i64);
        let cand = (q.z, p.frame_id, p.pixel, p.color);
        for y in (cy - r).max(0)..=(cy + r).min(h as i64 - 1) {
            for x in (cx - r).max(0)..=(cx + r).min(w as i64 - 1) {
                let slot = &mut zbuf[y as usize * w + x as usize];
                let better = match slot {
                    None => true,
                    Some(cur) => {
                        cand.0
                            .total_cmp(&cur.0)
                            .then(cand.1.cmp(&cur.1))
                            .then(cand.2.cmp(&cur.2))
                            .is_lt()
                    }
                };
                if better {
                    *slot = Some(cand);
                }
            }
        }
    }
    let mut rgb = RgbImage::new(w as u32, h as u32);
    let mut depth = DepthMap::filled(w, h, 0.0);
    let mut valid = BinaryMask::new(w, h);
    for (i, s) in zbuf.into_iter().enumerate() {
        if let Some((z, _, _, c)) = s {
            let (x, y) = (i % w, i / w);
            rgb.put_pixel(x as u32, y as u32, image::Rgb(c));
            depth.set(x, y, z);
            valid.set(x, y, true);
        }
    }
    (rgb, depth, valid)
}

fn render_frames(
    memory: &SceneMemory,
    frames: Vec<usize>,
    target: &CameraPose,
    k: &CameraIntrinsics,
    radius: usize,
) -> Result<SpatialPrompt, PromptError> {
    let pts = memory.frame_subset(&frames)?;
    let (rgb, depth, valid) = splat_points(&pts, target, k, radius);
    Ok(SpatialPrompt {
        rgb,
        depth,
        valid,
        target: *target,
        frames,
    })
}

/// Splats the points of the `n` best-overlapping frames into `target`.
pub fn render_prompt(
    memory: &SceneMemory,
    target: &CameraPose,
    k: &CameraIntrinsics,
    n: usize,
    radius: usize,
) -> Result<SpatialPrompt, PromptError> {
    if n == 0 {
        return Err(PromptError::InvalidConfig("n must be at least 1".into()));
    }
    if memory.point_count() == 0 {
        return Err(PromptError::EmptyMemory);
    }
    render_frames(memory, select_top_n(memory, target, k, n), target, k, radius)
}

/// One prompt per target, rendered in parallel according to `cfg.exec`.
pub fn render_prompts(
    memory: &SceneMemory,
    targets: &[CameraPose],
    k: &CameraIntrinsics,
    cfg: &PromptConfig,
) -> Result<Vec<SpatialPrompt>, PromptError> {
    cfg.validate()?;
    if memory.point_count() == 0 {
        return Err(PromptError::EmptyMemory);
    }
    let shared = cfg
        .shared_topn
        .then(|| select_shared_top_n(memory, targets, k, cfg.n));
    map_range(cfg.exec, targets.len(), |i| {
        let t = &targets[i];
        let frames = shared
            .clone()
            .unwrap_or_else(|| select_top_n(memory, t, k, cfg.n));
        render_frames(memory, frames, t, k, cfg.radius)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_memory::{fuse_static, FusionConfig};
    use crate::synth::{generate, render_static_gt, static_room};
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 64.0, 48.0, 128, 96).unwrap()
    }

    fn memory_of(points: Vec<CloudPoint>) -> SceneMemory {
        let frames = points.iter().map(|p| p.frame_id).max().map_or(0, |m| m as usize + 1);
        let mut per = vec![Vec::new(); frames];
        for p in points {
            per[p.frame_id as usize].push(p);
        }
        SceneMemory {
            intrinsics: k(),
            poses: vec![CameraPose::identity(); frames],
            frames: per,
            voxel_size: 0.0,
            edge_threshold: None,
        }
    }

    fn pt(x: f64, y: f64, z: f64, c: u8, frame: u32, pixel: u32) -> CloudPoint {
        CloudPoint {
            position: [x, y, z],
            color: [c, c, c],
            frame_id: frame,
            pixel,
        }
    }

    #[test]
    fn single_splat_on_principal_ray() {
        let m = memory_of(vec![pt(0.0, 0.0, 2.0, 200, 0, 0)]);
        let p = render_prompt(&m, &CameraPose::identity(), &k(), 7, 0).unwrap();
        assert_eq!(p.valid.count(), 1);
        assert!(p.valid.get(64, 48));
        assert_eq!(p.depth.get(64, 48), 2.0);
        assert_eq!(p.rgb.get_pixel(64, 48).0, [200, 200, 200]);
        assert_eq!(p.rgb.get_pixel(0, 0).0, [0, 0, 0]);
        let p = render_prompt(&m, &CameraPose::identity(), &k(), 7, 1).unwrap();
        assert_eq!(p.valid.count(), 9);
    }

    #[test]
    fn nearest_point_wins() {
        let m = memory_of(vec![pt(0.0, 0.0, 3.0, 10, 0, 0), pt(0.0, 0.0, 2.0, 20, 1, 0)]);
        let p = render_prompt(&m, &CameraPose::identity(), &k(), 7, 0).unwrap();
        assert_eq!(p.rgb.get_pixel(64, 48).0, [20, 20, 20]);
    }

    #[test]
    fn overlap_self_and_opposite() {
        let out = generate(&static_room(0), Execution::Parallel).unwrap();
        let m = fuse_static(&out.sequence, None, &FusionConfig::default()).unwrap();
        let pose = out.sequence.poses[4];
        assert_eq!(fov_overlap(&m, 4, &pose, &k()).unwrap(), 1.0);
        let turn = CameraPose::from_axis_angle(Vector3::y(), std::f64::consts::PI, Vector3::zeros());
        let opposite = turn.compose(&pose);
        assert_eq!(fov_overlap(&m, 4, &opposite, &k()).unwrap(), 0.0);
        assert_eq!(select_top_n(&m, &pose, &k(), 7)[0], 4);
        assert!(matches!(fov_overlap(&m, 99, &pose, &k()), Err(PromptError::FrameOutOfRange { .. })));
    }

    #[test]
    fn top_n_exhausts_small_memories() {
        let m = memory_of(vec![pt(0.0, 0.0, 2.0, 1, 0, 0), pt(0.0, 0.0, 2.0, 1, 1, 0), pt(0.0, 0.0, 2.0, 1, 2, 0)]);
        assert_eq!(select_top_n(&m, &CameraPose::identity(), &k(), 7), vec![0, 1, 2]);
    }

    #[test]
    fn self_reprojection_is_exact() {
        let out = generate(&static_room(1), Execution::Parallel).unwrap();
        let cfg = FusionConfig {
            edge_threshold: None,
            ..FusionConfig::default()
        };
        let m = fuse_static(&out.sequence, None, &cfg).unwrap();
        let f = 7;
        let pts = m.frame_subset(&[f]).unwrap();
        let (rgb, _, valid) = splat_points(&pts, &out.sequence.poses[f], &k(), 0);
        let src = &out.sequence.frames[f].rgb;
        let mut checked = 0;
        for y in 0..96u32 {
            for x in 0..128u32 {
                if valid.get(x as usize, y as usize) {
                    assert_eq!(rgb.get_pixel(x, y), src.get_pixel(x, y));
                    checked += 1;
                }
            }
        }
        assert!(checked > 128 * 96 * 9 / 10);
    }

    #[test]
    fn render_matches_static_gt_at_input_pose() {
        let spec = static_room(2);
        let out = generate(&spec, Execution::Parallel).unwrap();
        let m = fuse_static(&out.sequence, None, &FusionConfig::default()).unwrap();
        let pose = out.sequence.poses[10];
        let p = render_prompt(&m, &pose, &k(), 7, 0).unwrap();
        let (gt, _) = render_static_gt(&spec, &pose).unwrap();
        let mut se = 0.0;
        for y in 0..96u32 {
            for x in 0..128u32 {
                if p.valid.get(x as usize, y as usize) {
                    for c in 0..3 {
                        let d = p.rgb.get_pixel(x, y).0[c] as f64 - gt.get_pixel(x, y).0[c] as f64;
                        se += (d / 255.0).powi(2);
                    }
                }
            }
        }
        let psnr = -10.0 * (se / (3.0 * p.valid.count() as f64)).log10();
        assert!(psnr > 30.0, "psnr {psnr}");
    }

    #[test]
    fn more_frames_never_shrink_coverage() {
        let out = generate(&static_room(3), Execution::Parallel).unwrap();
        let m = fuse_static(&out.sequence, None, &FusionConfig::default()).unwrap();
        let t = out.sequence.poses[15];
        let mut prev = 0;
        for n in 1..10 {
            let c = render_prompt(&m, &t, &k(), n, 1).unwrap().valid.count();
            assert!(c >= prev);
            prev = c;
        }
    }

    proptest! {
        #[test]
        fn splat_is_order_independent(
            raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.5f64..3.0, any::<u8>(), 0u32..3), 1..60),
            rot in 0usize..60,
        ) {
            let pts: Vec<CloudPoint> = raw
                .iter()
                .enumerate()
                // Coarse depths force ties.
                .map(|(i, &(x, y, z, c, f))| pt(x, y, (z * 4.0).round() / 4.0, c, f, i as u32))
                .collect();
            let mut shuffled = pts.clone();
            shuffled.reverse();
            let r = rot % shuffled.len();
            shuffled.rotate_left(r);
            let a = splat_points(&pts, &CameraPose::identity(), &k(), 1);
            let b = splat_points(&shuffled, &CameraPose::identity(), &k(), 1);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn zbuffer_holds_minimum_depth(
            raw in prop::collection::vec((-0.3f64..0.3, -0.3f64..0.3, 0.5f64..3.0), 1..40),
            radius in 0usize..3,
        ) {
            let pts: Vec<CloudPoint> = raw.iter().enumerate().map(|(i, &(x, y, z))| pt(x, y, z, 9, 0, i as u32)).collect();
            let kk = k();
            let (_, depth, valid) = splat_points(&pts, &CameraPose::identity(), &kk, radius);
            let r = radius as i64;
            for y in 0..96usize {
                for x in 0..128usize {
                    let best = pts
                        .iter()
                        .filter(|p| {
                            let [px, py, pz] = p.position;
                            let u = (kk.fx * px / pz + kk.cx).floor() as i64;
                            let v = (kk.fy * py / pz + kk.cy).floor() as i64;
                            (u - x as i64).abs() <= r && (v - y as i64).abs() <= r
                        })
                        .map(|p| p.position[2])
                        .fold(f64::INFINITY, f64::min);
                    if best.is_finite() {
                        prop_assert!(valid.get(x, y));
                        prop_assert_eq!(depth.get(x, y), best);
                    } else {
                        prop_assert!(!valid.get(x, y));
                    }
                }
            }
        }
    }
}
