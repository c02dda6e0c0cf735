//! Sequence manifest: a line-oriented text file describing one RGB-D video.
//!
//! ```text
//! scenemem-manifest 1
//! frame_count 3
//! intrinsics 100 100 64 48 128 96
//! depth_scale 0.001
//! trajectory trajectory.txt
//! frame 0 rgb=rgb/0000.png depth=depth/0000.png flow=flow/0000.flo
//! frame 1 rgb=rgb/0001.png depth=depth/0001.png flow=flow/0001.flo bflow=bflow/0001.flo
//! frame 2 rgb=rgb/0002.png depth=depth/0002.png bflow=bflow/0002.flo mask=mask/0002.png
//! ```
//!
//! `intrinsics` is `fx fy cx cy width height`. Paths are relative to the
//! manifest's directory. `flow` is the forward flow to the next frame,
//! `bflow` the backward flow to the previous frame and `mask` an external
//! dynamic mask; all three are optional. Lines starting with `#` are
//! comments. The header line must come first; the other header keys may
//! appear in any order before the frame lines.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{check_terminated, read_text, write_bytes, FormatError};
use crate::geometry::CameraIntrinsics;

pub const MANIFEST_HEADER: &str = "scenemem-manifest 1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameEntry {
    pub rgb: PathBuf,
    pub depth: PathBuf,
    pub flow: Option<PathBuf>,
    pub backward_flow: Option<PathBuf>,
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceManifest {
    /// Directory that relative paths resolve against.
    pub root: PathBuf,
    pub intrinsics: CameraIntrinsics,
    pub depth_scale: f64,
    pub trajectory: PathBuf,
    pub frames: Vec<FrameEntry>,
}

impl SequenceManifest {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    /// Parses manifest text without touching the filesystem.
    pub fn parse(text: &str, root: &Path) -> Result<Self, FormatError> {
        check_terminated(text)?;
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, l)) if l == MANIFEST_HEADER => {}
            Some((n, l)) => {
                return Err(FormatError::parse(n, format!("expected {MANIFEST_HEADER:?}, found {l:?}")))
            }
            None => return Err(FormatError::MalformedHeader("empty manifest".into())),
        }
        let mut frame_count: Option<usize> = None;
        let mut intrinsics = None;
        let mut depth_scale = None;
        let mut trajectory = None;
        let mut frames: Vec<FrameEntry> = Vec::new();
        for (n, line) in lines {
            let tok: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| -> Result<f64, FormatError> {
                s.parse::<f64>()
                    .map_err(|_| FormatError::parse(n, format!("bad number {s:?}")))
            };
            let int = |s: &str| -> Result<usize, FormatError> {
                s.parse::<usize>()
                    .map_err(|_| FormatError::parse(n, format!("bad integer {s:?}")))
            };
            match tok.as_slice() {
                ["frame_count", v] if frames.is_empty() => frame_count = Some(int(v)?),
                ["intrinsics", fx, fy, cx, cy, w, h] if frames.is_empty() => {
                    let k = CameraIntrinsics::new(num(fx)?, num(fy)?, num(cx)?, num(cy)?, int(w)?, int(h)?)
                        .map_err(|e| FormatError::parse(n, e.to_string()))?;
                    intrinsics = Some(k);
                }
                ["depth_scale", v] if frames.is_empty() => {
                    let s = num(v)?;
                    if !(s.is_finite() && s > 0.0) {
                        return Err(FormatError::parse(n, "depth_scale must be positive"));
                    }
                    depth_scale = Some(s);
                }
                ["trajectory", p] if frames.is_empty() => trajectory = Some(PathBuf::from(p)),
                ["frame", idx, rest @ ..] => {
                    let idx = int(idx)?;
                    if idx != frames.len() {
                        return Err(FormatError::parse(
                            n,
                            format!("frame {idx} out of order, expected {}", frames.len()),
                        ));
                    }
                    frames.push(parse_frame(rest, n)?);
                }
                _ => return Err(FormatError::parse(n, format!("unrecognized line {line:?}"))),
            }
        }
        let missing = |k: &str| FormatError::MalformedHeader(format!("missing {k}"));
        let frame_count = frame_count.ok_or_else(|| missing("frame_count"))?;
        if frame_count < 2 {
            return Err(FormatError::MalformedHeader(format!(
                "frame_count {frame_count} < 2"
            )));
        }
        if frames.len() != frame_count {
            return Err(FormatError::MalformedHeader(format!(
                "frame_count {frame_count} but {} frame lines",
                frames.len()
            )));
        }
        Ok(Self {
            root: root.to_path_buf(),
            intrinsics: intrinsics.ok_or_else(|| missing("intrinsics"))?,
            depth_scale: depth_scale.ok_or_else(|| missing("depth_scale"))?,
            trajectory: trajectory.ok_or_else(|| missing("trajectory"))?,
            frames,
        })
    }

    /// Reads and parses a manifest, then checks every referenced file exists.
    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let text = read_text(path)?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Self::parse(&text, &root)?;
        for p in m.referenced_paths() {
            let full = m.resolve(p);
            if !full.is_file() {
                return Err(FormatError::MissingFile(full));
            }
        }
        Ok(m)
    }

    fn referenced_paths(&self) -> impl Iterator<Item = &PathBuf> {
        std::iter::once(&self.trajectory).chain(self.frames.iter().flat_map(|f| {
            [Some(&f.rgb), Some(&f.depth), f.flow.as_ref(), f.backward_flow.as_ref(), f.mask.as_ref()]
                .into_iter()
                .flatten()
        }))
    }

    pub fn to_text(&self) -> String {
        let k = &self.intrinsics;
        let mut s = String::new();
        let _ = writeln!(s, "{MANIFEST_HEADER}");
        let _ = writeln!(s, "frame_count {}", self.frames.len());
        let _ = writeln!(s, "intrinsics {} {} {} {} {} {}", k.fx, k.fy, k.cx, k.cy, k.width, k.height);
        let _ = writeln!(s, "depth_scale {}", self.depth_scale);
        let _ = writeln!(s, "trajectory {}", path_str(&self.trajectory));
        for (i, f) in self.frames.iter().enumerate() {
            let _ = write!(s, "frame {i} rgb={} depth={}", path_str(&f.rgb), path_str(&f.depth));
            for (key, p) in [("flow", &f.flow), ("bflow", &f.backward_flow), ("mask", &f.mask)] {
                if let Some(p) = p {
                    let _ = write!(s, " {key}={}", path_str(p));
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        write_bytes(path, self.to_text().as_bytes())
    }
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

fn parse_frame(fields: &[&str], line: usize) -> Result<FrameEntry, FormatError> {
    let mut e = FrameEntry::default();
    let (mut rgb, mut depth) = (false, false);
    for f in fields {
        let (key, value) = f
            .split_once('=')
            .ok_or_else(|| FormatError::parse(line, format!("expected key=value, found {f:?}")))?;
        if value.is_empty() {
            return Err(FormatError::parse(line, format!("empty path for {key}")));
        }
        let p = PathBuf::from(value);
        let slot_filled = match key {
            "rgb" => {
                e.rgb = p;
                std::mem::replace(&mut rgb, true)
            }
            "depth" => {
                e.depth = p;
                std::mem::replace(&mut depth, true)
            }
            "flow" => e.flow.replace(p).is_some(),
            "bflow" => e.backward_flow.replace(p).is_some(),
            "mask" => e.mask.replace(p).is_some(),
            other => return Err(FormatError::parse(line, format!("unknown key {other:?}"))),
        };
        if slot_filled {
            return Err(FormatError::parse(line, format!("duplicate key {key:?}")));
        }
    }
    if !(rgb && depth) {
        return Err(FormatError::parse(line, "frame needs rgb= and depth="));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "scenemem-manifest 1\nframe_count 2\nintrinsics 100 100 64 48 128 96\n\
        depth_scale 0.001\ntrajectory trajectory.txt\n\
        frame 0 rgb=rgb/0000.png depth=depth/0000.png flow=flow/0000.flo\n\
        frame 1 rgb=rgb/0001.png depth=depth/0001.png bflow=bflow/0001.flo mask=mask/0001.png\n";

    #[test]
    fn parse_and_print_round_trip() {
        let m = SequenceManifest::parse(TEXT, Path::new("/data")).unwrap();
        assert_eq!(m.frame_count(), 2);
        assert_eq!(m.intrinsics.width, 128);
        assert_eq!(m.frames[1].mask.as_deref(), Some(Path::new("mask/0001.png")));
        assert_eq!(m.resolve(&m.trajectory), Path::new("/data/trajectory.txt"));
        assert_eq!(m.to_text(), TEXT);
    }

    #[test]
    fn rejects_bad_documents() {
        let root = Path::new(".");
        assert!(SequenceManifest::parse("", root).is_err());
        assert!(SequenceManifest::parse(&TEXT.replace("frame_count 2", "frame_count 3"), root).is_err());
        assert!(SequenceManifest::parse(&TEXT.replace("frame 1 ", "frame 5 "), root).is_err());
        assert!(SequenceManifest::parse(&TEXT.replace("mask=", "bogus="), root).is_err());
        assert!(SequenceManifest::parse(&TEXT.replace("rgb=rgb/0001.png ", ""), root).is_err());
        let single = "scenemem-manifest 1\nframe_count 1\nintrinsics 1 1 0 0 2 2\ndepth_scale 1\n\
                      trajectory t\nframe 0 rgb=a depth=b\n";
        assert!(SequenceManifest::parse(single, root).is_err());
    }

    #[test]
    fn every_truncation_is_typed() {
        for cut in 0..TEXT.len() {
            let _ = SequenceManifest::parse(&TEXT[..cut], Path::new("."));
        }
    }

    #[test]
    fn load_checks_files_exist() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest");
        std::fs::write(&p, TEXT).unwrap();
        assert!(matches!(SequenceManifest::load(&p), Err(FormatError::MissingFile(_))));
    }
}
