//! Dynamic-region masking.
//!
//! Pixels whose optical flow disagrees with the flow the camera motion alone
//! would produce are flagged per frame. A few of them are sampled, tracked
//! back to frame 0 through the flow chain, and used as seeds for region
//! growing, which is then carried forward through the sequence.

mod pixel;
mod propagate;
mod tracking;

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use pixel::{chain_flows, pixel_motion_mask};
pub use propagate::{advect_seeds, grow_regions, propagate_object_masks, GrowParams};
pub use tracking::{backward_track, sample_dynamic_points, FlowChain, Track, TrackedPointSet};

use crate::geometry::{induced_flow, CameraIntrinsics, FlowField, GeometryError};
use crate::io::{read_mask, FormatError, Sequence, SequenceManifest};
use crate::par::{try_map_range, Execution};
use crate::raster::BinaryMask;

#[derive(Debug, thiserror::Error)]
pub enum MaskError {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("expected {expected} frames, got {actual}")]
    FrameCountMismatch { expected: usize, actual: usize },
    #[error("no flow available to reach frame {frame}")]
    MissingFlowHop { frame: usize },
    #[error("frame {frame} has no mask to import")]
    MissingMask { frame: usize },
    #[error("invalid mask configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Computed,
    Imported,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMask {
    pub mask: BinaryMask,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskConfig {
    /// Flow residual threshold in pixels.
    pub tau: f64,
    /// Points sampled per frame for tracking.
    pub samples: usize,
    pub seed: u64,
    pub color_thresh: f64,
    pub depth_thresh: f64,
    /// Frame gap used for the motion test.
    pub stride: usize,
    pub max_track_spread: f64,
    pub exec: Execution,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            tau: 2.0,
            samples: 64,
            seed: 0,
            color_thresh: 30.0 / 255.0,
            depth_thresh: 0.05,
            stride: 1,
            max_track_spread: 1.0,
            exec: Execution::Parallel,
        }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<(), MaskError> {
        let bad = |m: String| Err(MaskError::InvalidConfig(m));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.color_thresh) {
            return bad(format!("color threshold {} outside [0, 1]", self.color_thresh));
        }
        if !(self.depth_thresh >= 0.0 && self.depth_thresh.is_finite()) {
            return bad(format!("depth threshold {} must be non-negative", self.depth_thresh));
        }
        if !(self.max_track_spread >= 0.0) {
            return bad(format!("track spread {} must be non-negative", self.max_track_spread));
        }
        Ok(())
    }

    fn grow_params(&self) -> GrowParams {
        GrowParams {
            color_thresh: self.color_thresh,
            depth_thresh: self.depth_thresh,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskOutput {
    pub pixel_masks: Vec<BinaryMask>,
    pub tracks: TrackedPointSet,
    pub object_masks: Vec<ObjectMask>,
}

/// Composes the flows `from → to` hop by hop; `None` if any hop is missing.
fn flow_between(seq: &Sequence, from: usize, to: usize) -> Result<Option<FlowField>, MaskError> {
    let step = |i: usize| -> Option<&FlowField> {
        if to > from {
            seq.frames[i].flow.as_ref()
        } else {
            seq.frames[i].backward_flow.as_ref()
        }
    };
    let path: Vec<usize> = if to > from {
        (from..to).collect()
    } else {
        (to + 1..=from).rev().collect()
    };
    let mut acc: Option<FlowField> = None;
    for i in path {
        let Some(f) = step(i) else { return Ok(None) };
        acc = Some(match acc {
            None => f.clone(),
            Some(a) => chain_flows(&a, f)?,
        });
    }
    Ok(acc)
}

/// Per-frame motion masks: frame `i` is compared against `i + stride`, or
/// `i - stride` near the end of the sequence or when forward flow is absent.
pub fn pixel_masks(seq: &Sequence, cfg: &MaskConfig) -> Result<Vec<BinaryMask>, MaskError> {
    cfg.validate()?;
    let n = seq.len();
    let k = &seq.intrinsics;
    try_map_range(cfg.exec, n, |i| {
        let mut candidates = Vec::with_capacity(2);
        if i + cfg.stride < n {
            candidates.push(i + cfg.stride);
        }
        if i >= cfg.stride {
            candidates.push(i - cfg.stride);
        }
        for j in candidates {
            if let Some(optical) = flow_between(seq, i, j)? {
                let warp = induced_flow(&seq.frames[i].depth, &seq.poses[i], &seq.poses[j], k)?;
                return pixel_motion_mask(&optical, &warp, cfg.tau);
            }
        }
        Err(MaskError::MissingFlowHop { frame: i })
    })
}

/// Frame-0 pixels of surviving tracks whose color still matches the color
/// where the track started. Tracks that slid off their object onto the
/// background during the hop chain are dropped here.
fn consistent_seeds(seq: &Sequence, tracks: &TrackedPointSet, color_thresh: f64) -> Vec<(usize, usize)> {
    let k = &seq.intrinsics;
    let thresh = color_thresh * 255.0;
    tracks
        .tracks
        .iter()
        .filter(|t| t.alive)
        .filter_map(|t| {
            let (x, y) = k.pixel_of(t.position.0, t.position.1)?;
            let (sx, sy) = k.pixel_of(t.start.0, t.start.1)?;
            let a = seq.frames[0].rgb.get_pixel(x as u32, y as u32).0;
            let b = seq.frames[t.origin_frame].rgb.get_pixel(sx as u32, sy as u32).0;
            (0..3)
                .all(|c| (a[c] as f64 - b[c] as f64).abs() <= thresh)
                .then_some((x, y))
        })
        .collect()
}

fn frame_seed(seed: u64, frame: usize) -> u64 {
    ChaCha8Rng::seed_from_u64(seed ^ (frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)).next_u64()
}

/// Full masking pipeline over a loaded sequence.
pub fn compute_masks(seq: &Sequence, cfg: &MaskConfig) -> Result<MaskOutput, MaskError> {
    let raw = pixel_masks(seq, cfg)?;
    let opened: Vec<BinaryMask> = raw.iter().map(BinaryMask::open3).collect();
    let points: Vec<Vec<(f64, f64)>> = opened
        .iter()
        .enumerate()
        .map(|(f, m)| {
            sample_dynamic_points(m, cfg.samples, frame_seed(cfg.seed, f))
                .into_iter()
                .map(|(x, y)| (x as f64 + 0.5, y as f64 + 0.5))
                .collect()
        })
        .collect();
    let forward = seq.forward_flows();
    let backward = seq.backward_flows();
    let chain = FlowChain {
        forward: &forward,
        backward: &backward,
        max_spread: cfg.max_track_spread,
    };
    let k = &seq.intrinsics;
    let tracks = backward_track(&points, &chain, k.width, k.height)?;
    let seeds = consistent_seeds(seq, &tracks, cfg.color_thresh);
    let rgb: Vec<_> = seq.frames.iter().map(|f| f.rgb.clone()).collect();
    let depth: Vec<_> = seq.frames.iter().map(|f| f.depth.clone()).collect();
    let masks = propagate_object_masks(&seeds, &rgb, &depth, &forward, Some(&opened), cfg.grow_params())?;
    Ok(MaskOutput {
        pixel_masks: raw,
        tracks,
        object_masks: masks
            .into_iter()
            .map(|mask| ObjectMask {
                mask,
                provenance: Provenance::Computed,
            })
            .collect(),
    })
}

fn check_dims(mask: &BinaryMask, k: &CameraIntrinsics) -> Result<(), MaskError> {
    if mask.dims() != (k.width, k.height) {
        return Err(MaskError::DimensionMismatch {
            expected: (k.width, k.height),
            actual: mask.dims(),
        });
    }
    Ok(())
}

/// Masks referenced by the manifest's `mask=` entries.
pub fn import_masks(manifest: &SequenceManifest) -> Result<Vec<ObjectMask>, MaskError> {
    manifest
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let rel = f.mask.as_ref().ok_or(MaskError::MissingMask { frame: i })?;
            let mask = read_mask(&manifest.resolve(rel))?;
            check_dims(&mask, &manifest.intrinsics)?;
            Ok(ObjectMask {
                mask,
                provenance: Provenance::Imported,
            })
        })
        .collect()
}

/// Masks stored as `dir/%04d.png` for frames `0..count`.
pub fn import_mask_dir(
    dir: &Path,
    count: usize,
    k: &CameraIntrinsics,
) -> Result<Vec<ObjectMask>, MaskError> {
    (0..count)
        .map(|i| {
            let path = dir.join(format!("{i:04}.png"));
            if !path.exists() {
                return Err(MaskError::MissingMask { frame: i });
            }
            let mask = read_mask(&path)?;
            check_dims(&mask, k)?;
            Ok(ObjectMask {
                mask,
                provenance: Provenance::Imported,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, late_mover, moving_box, static_room};

    fn iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
        let inter = a.data().iter().zip(b.data()).filter(|(x, y)| **x && **y).count();
        let uni = a.data().iter().zip(b.data()).filter(|(x, y)| **x || **y).count();
        if uni == 0 {
            1.0
        } else {
            inter as f64 / uni as f64
        }
    }

    #[test]
    fn static_scene_has_no_dynamic_pixels() {
        let out = generate(&static_room(0), Execution::Parallel).unwrap();
        let m = compute_masks(&out.sequence, &MaskConfig::default()).unwrap();
        assert!(m.pixel_masks.iter().all(BinaryMask::is_empty));
        assert!(m.object_masks.iter().all(|o| o.mask.is_empty()));
    }

    #[test]
    fn moving_box_is_found() {
        let out = generate(&moving_box(0), Execution::Parallel).unwrap();
        let m = compute_masks(&out.sequence, &MaskConfig::default()).unwrap();
        let mean: f64 = m
            .object_masks
            .iter()
            .zip(&out.object_masks)
            .map(|(a, b)| iou(&a.mask, b))
            .sum::<f64>()
            / out.object_masks.len() as f64;
        assert!(mean > 0.8, "mean IoU {mean}");
    }

    #[test]
    fn deterministic_across_modes() {
        let out = generate(&late_mover(), Execution::Parallel).unwrap();
        let par = compute_masks(&out.sequence, &MaskConfig::default()).unwrap();
        let seq_cfg = MaskConfig {
            exec: Execution::Sequential,
            ..MaskConfig::default()
        };
        assert_eq!(par, compute_masks(&out.sequence, &seq_cfg).unwrap());
    }

    #[test]
    fn missing_flows_error() {
        let mut out = generate(&moving_box(0), Execution::Parallel).unwrap();
        for f in &mut out.sequence.frames {
            f.flow = None;
            f.backward_flow = None;
        }
        assert!(matches!(
            compute_masks(&out.sequence, &MaskConfig::default()),
            Err(MaskError::MissingFlowHop { frame: 0 })
        ));
    }

    #[test]
    fn config_validation() {
        let cfg = MaskConfig {
            stride: 0,
            ..MaskConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(MaskError::InvalidConfig(_))));
    }
}
