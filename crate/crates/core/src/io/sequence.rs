//! In-memory RGB-D sequence: everything a manifest points at, loaded.

use std::path::{Path, PathBuf};

use image::RgbImage;

use super::trajectory::records_from_poses;
use super::{
    read_depth, read_flow, read_mask, read_rgb, read_trajectory, write_depth, write_flow,
    write_mask, write_rgb, write_trajectory, FormatError, FrameEntry, SequenceManifest,
};
use crate::geometry::{CameraIntrinsics, CameraPose, FlowField};
use crate::par::{try_map_range, Execution};
use crate::raster::{BinaryMask, DepthMap};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub rgb: RgbImage,
    pub depth: DepthMap,
    /// Flow from this frame to the next one.
    pub flow: Option<FlowField>,
    /// Flow from this frame to the previous one.
    pub backward_flow: Option<FlowField>,
    pub mask: Option<BinaryMask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub intrinsics: CameraIntrinsics,
    pub depth_scale: f64,
    pub poses: Vec<CameraPose>,
    pub frames: Vec<Frame>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn forward_flows(&self) -> Vec<Option<FlowField>> {
        self.frames.iter().map(|f| f.flow.clone()).collect()
    }

    pub fn backward_flows(&self) -> Vec<Option<FlowField>> {
        self.frames.iter().map(|f| f.backward_flow.clone()).collect()
    }

    /// Loads every file referenced by `manifest` and checks sizes agree.
    pub fn load(manifest: &SequenceManifest, exec: Execution) -> Result<Self, FormatError> {
        let k = manifest.intrinsics;
        let records = read_trajectory(&manifest.resolve(&manifest.trajectory))?;
        if records.len() != manifest.frame_count()
            || records.iter().enumerate().any(|(i, r)| r.index() != i)
        {
            return Err(FormatError::MalformedHeader(format!(
                "trajectory must list frames 0..{} exactly once",
                manifest.frame_count()
            )));
        }
        let poses = records.iter().map(|r| *r.pose()).collect();
        let expect = (k.width, k.height);
        let check = |actual: (usize, usize)| {
            if actual == expect {
                Ok(())
            } else {
                Err(FormatError::DimensionMismatch {
                    expected: expect,
                    actual,
                })
            }
        };
        let frames = try_map_range(exec, manifest.frame_count(), |i| {
            let e = &manifest.frames[i];
            let rgb = read_rgb(&manifest.resolve(&e.rgb))?;
            check((rgb.width() as usize, rgb.height() as usize))?;
            let depth = read_depth(&manifest.resolve(&e.depth), manifest.depth_scale)?;
            check((depth.width(), depth.height()))?;
            let load_flow = |p: &Option<PathBuf>| -> Result<Option<FlowField>, FormatError> {
                p.as_ref()
                    .map(|p| {
                        let f = read_flow(&manifest.resolve(p))?;
                        check(f.dims()).map(|_| f)
                    })
                    .transpose()
            };
            let flow = load_flow(&e.flow)?;
            let backward_flow = load_flow(&e.backward_flow)?;
            let mask = e
                .mask
                .as_ref()
                .map(|p| {
                    let m = read_mask(&manifest.resolve(p))?;
                    check(m.dims()).map(|_| m)
                })
                .transpose()?;
            Ok(Frame {
                rgb,
                depth,
                flow,
                backward_flow,
                mask,
            })
        })?;
        Ok(Self {
            intrinsics: k,
            depth_scale: manifest.depth_scale,
            poses,
            frames,
        })
    }

    pub fn load_path(path: &Path, exec: Execution) -> Result<Self, FormatError> {
        Self::load(&SequenceManifest::load(path)?, exec)
    }

    /// Writes the sequence under `dir` with the standard layout
    /// (`rgb/`, `depth/`, `flow/`, `bflow/`, `mask/`, `trajectory.txt`,
    /// `manifest`) and returns the manifest.
    pub fn write(&self, dir: &Path, exec: Execution) -> Result<SequenceManifest, FormatError> {
        let entries = try_map_range(exec, self.len(), |i| {
            let f = &self.frames[i];
            let name = |sub: &str, ext: &str| PathBuf::from(format!("{sub}/{i:04}.{ext}"));
            let e = FrameEntry {
                rgb: name("rgb", "png"),
                depth: name("depth", "png"),
                flow: f.flow.as_ref().map(|_| name("flow", "flo")),
                backward_flow: f.backward_flow.as_ref().map(|_| name("bflow", "flo")),
                mask: f.mask.as_ref().map(|_| name("mask", "png")),
            };
            write_rgb(&dir.join(&e.rgb), &f.rgb)?;
            write_depth(&dir.join(&e.depth), &f.depth, self.depth_scale)?;
            if let (Some(p), Some(flow)) = (&e.flow, &f.flow) {
                write_flow(&dir.join(p), flow)?;
            }
            if let (Some(p), Some(flow)) = (&e.backward_flow, &f.backward_flow) {
                write_flow(&dir.join(p), flow)?;
            }
            if let (Some(p), Some(mask)) = (&e.mask, &f.mask) {
                write_mask(&dir.join(p), mask)?;
            }
            Ok::<_, FormatError>(e)
        })?;
        let manifest = SequenceManifest {
            root: dir.to_path_buf(),
            intrinsics: self.intrinsics,
            depth_scale: self.depth_scale,
            trajectory: PathBuf::from("trajectory.txt"),
            frames: entries,
        };
        write_trajectory(&dir.join("trajectory.txt"), &records_from_poses(&self.poses))?;
        manifest.write(&dir.join("manifest"))?;
        Ok(manifest)
    }
}
