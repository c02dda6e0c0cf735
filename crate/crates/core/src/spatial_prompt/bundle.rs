//! Conditioning bundle: the last `w` input frames followed by one spatial
//! prompt per target pose, written as numbered PNGs plus an index file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::RgbImage;

use super::{render_prompts, PromptConfig, PromptError, SpatialPrompt};
use crate::geometry::CameraPose;
use crate::io::{check_terminated, read_text, write_bytes, write_mask, write_rgb, Sequence};
use crate::scene_memory::SceneMemory;

pub const BUNDLE_HEADER: &str = "scenemem-bundle 1";
pub const BUNDLE_INDEX: &str = "bundle.index";

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningBundle {
    /// `(input frame index, image)` for the last `w` frames, oldest first.
    pub temporal: Vec<(usize, RgbImage)>,
    pub spatial: Vec<SpatialPrompt>,
}

impl ConditioningBundle {
    pub fn len(&self) -> usize {
        self.temporal.len() + self.spatial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Collects the temporal window and renders one prompt per target.
pub fn assemble_conditioning(
    seq: &Sequence,
    memory: &SceneMemory,
    targets: &[CameraPose],
    w: usize,
    cfg: &PromptConfig,
) -> Result<ConditioningBundle, PromptError> {
    if w == 0 {
        return Err(PromptError::InvalidConfig("temporal window must be at least 1".into()));
    }
    if targets.is_empty() {
        return Err(PromptError::InvalidConfig("at least one target pose is required".into()));
    }
    if seq.len() < w {
        return Err(PromptError::InsufficientFrames {
            need: w,
            have: seq.len(),
        });
    }
    let temporal = (seq.len() - w..seq.len())
        .map(|i| (i, seq.frames[i].rgb.clone()))
        .collect();
    let spatial = render_prompts(memory, targets, &seq.intrinsics, cfg)?;
    Ok(ConditioningBundle { temporal, spatial })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BundleRole {
    Temporal { source: usize },
    Spatial { target: usize, valid: PathBuf, frames: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleEntry {
    pub slot: usize,
    pub role: BundleRole,
    pub rgb: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleIndex {
    pub temporal_window: usize,
    pub spatial_count: usize,
    pub entries: Vec<BundleEntry>,
}

fn index_text(b: &ConditioningBundle) -> String {
    let mut s = format!(
        "{BUNDLE_HEADER}\ntemporal_window {}\nspatial_count {}\n",
        b.temporal.len(),
        b.spatial.len()
    );
    for (slot, (src, _)) in b.temporal.iter().enumerate() {
        let _ = writeln!(s, "frame {slot} temporal source={src} rgb=temporal/{slot:04}.png");
    }
    for (t, p) in b.spatial.iter().enumerate() {
        let ids: Vec<String> = p.frames.iter().map(usize::to_string).collect();
        let _ = writeln!(
            s,
            "frame {} spatial target={t} rgb=spatial/{t:04}.png valid=spatial_valid/{t:04}.png topn={}",
            b.temporal.len() + t,
            ids.join(",")
        );
    }
    s
}

/// Writes the bundle layout under `dir`.
pub fn write_bundle(bundle: &ConditioningBundle, dir: &Path) -> Result<(), PromptError> {
    for (slot, (_, img)) in bundle.temporal.iter().enumerate() {
        write_rgb(&dir.join(format!("temporal/{slot:04}.png")), img)?;
    }
    for (t, p) in bundle.spatial.iter().enumerate() {
        write_rgb(&dir.join(format!("spatial/{t:04}.png")), &p.rgb)?;
        write_mask(&dir.join(format!("spatial_valid/{t:04}.png")), &p.valid)?;
    }
    write_bytes(&dir.join(BUNDLE_INDEX), index_text(bundle).as_bytes())?;
    Ok(())
}

fn parse_entry(line: &str) -> Result<BundleEntry, PromptError> {
    let bad = || PromptError::MalformedIndex(format!("bad frame line '{line}'"));
    let mut it = line.split_whitespace();
    it.next();
    let slot = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let kind = it.next().ok_or_else(bad)?;
    let mut attrs = std::collections::BTreeMap::new();
    for kv in it {
        let (k, v) = kv.split_once('=').ok_or_else(bad)?;
        attrs.insert(k, v);
    }
    let get = |k: &str| attrs.get(k).copied().ok_or_else(bad);
    let num = |k: &str| get(k)?.parse::<usize>().map_err(|_| bad());
    let role = match kind {
        "temporal" => BundleRole::Temporal { source: num("source")? },
        "spatial" => {
            let ids = get("topn")?;
            let frames = if ids.is_empty() {
                Vec::new()
            } else {
                ids.split(',')
                    .map(|s| s.parse().map_err(|_| bad()))
                    .collect::<Result<_, _>>()?
            };
            BundleRole::Spatial {
                target: num("target")?,
                valid: PathBuf::from(get("valid")?),
                frames,
            }
        }
        _ => return Err(bad()),
    };
    Ok(BundleEntry {
        slot,
        role,
        rgb: PathBuf::from(get("rgb")?),
    })
}

/// Parses a `bundle.index` file and checks that the counts and slot order
/// agree with its header lines.
pub fn read_bundle_index(path: &Path) -> Result<BundleIndex, PromptError> {
    let text = read_text(path)?;
    check_terminated(&text)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(BUNDLE_HEADER) {
        return Err(PromptError::MalformedIndex(format!("expected '{BUNDLE_HEADER}' header")));
    }
    let mut count = |key: &str| -> Result<usize, PromptError> {
        let line = lines.next().unwrap_or_default();
        line.strip_prefix(key)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| PromptError::MalformedIndex(format!("expected '{key} <count>'")))
    };
    let temporal_window = count("temporal_window")?;
    let spatial_count = count("spatial_count")?;
    let entries = lines.map(parse_entry).collect::<Result<Vec<_>, _>>()?;
    let temporal = entries
        .iter()
        .filter(|e| matches!(e.role, BundleRole::Temporal { .. }))
        .count();
    if temporal != temporal_window
        || entries.len() != temporal_window + spatial_count
        || entries.iter().enumerate().any(|(i, e)| e.slot != i)
        || entries[..temporal].iter().any(|e| !matches!(e.role, BundleRole::Temporal { .. }))
    {
        return Err(PromptError::MalformedIndex(
            "entries disagree with the declared layout".into(),
        ));
    }
    Ok(BundleIndex {
        temporal_window,
        spatial_count,
        entries,
    })
}
