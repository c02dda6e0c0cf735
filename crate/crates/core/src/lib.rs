//! Static-only 3D scene memory for dynamic videos.
//!
//! The crate turns the per-frame outputs of a dynamic SLAM system (poses,
//! depth, optical flow) into a static-only point cloud, renders that cloud
//! at arbitrary target cameras as spatial prompts, and assembles the
//! temporal + spatial conditioning bundle consumed by a video generator.
//! It also ships a ray-cast synthetic scene generator used as a test oracle
//! and the camera/scene-consistency metrics used for evaluation.
//!
//! Pipeline stages:
//!
//! * [`dynamic_mask`]: flow-residual thresholding, backward tracking to
//!   frame 0 and object-level propagation.
//! * [`scene_memory`]: fusion of static pixels into per-frame tagged
//!   world points.
//! * [`spatial_prompt`]: field-of-view overlap retrieval, z-buffered
//!   splatting and conditioning bundle assembly.
//! * [`eval`]: trajectory and revisit-consistency metrics.

// `!(a < b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamic_mask;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod par;
pub mod raster;
pub mod scene_memory;
pub mod spatial_prompt;
pub mod synth;

pub use geometry::{CameraIntrinsics, CameraPose, FlowField};
pub use par::Execution;
pub use raster::{BinaryMask, DepthMap};
