//! Readers and writers for every on-disk artifact.
//!
//! Each format has a pair of byte-level functions (`encode_*` / `decode_*`)
//! and thin path wrappers. Decoders never panic on malformed input; every
//! failure is a [`FormatError`].

use std::path::{Path, PathBuf};

use thiserror::Error;

mod depth;
mod flow;
mod manifest;
mod ply;
mod png;
mod sequence;
mod trajectory;

pub use depth::{decode_depth, encode_depth, read_depth, write_depth};
pub use flow::{decode_flow, encode_flow, read_flow, write_flow, FLOW_MAGIC, UNKNOWN_FLOW};
pub use manifest::{FrameEntry, SequenceManifest, MANIFEST_HEADER};
pub use ply::{
    decode_pointcloud, encode_pointcloud, read_pointcloud, write_pointcloud, CloudPoint,
    PlyEncoding,
};
pub use png::{decode_mask, decode_rgb, encode_mask, encode_rgb, read_mask, read_rgb, write_mask, write_rgb};
pub use sequence::{Frame, Sequence};
pub use trajectory::{
    decode_trajectory, encode_trajectory, read_trajectory, records_from_poses, write_trajectory,
    TrajectoryRecord,
};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: quaternion norm {norm} is not unit")]
    NonUnitQuaternion { line: usize, norm: f64 },
    #[error("unsupported image layout: {0}")]
    UnsupportedBitDepth(String),
    #[error("corrupt file: {0}")]
    FileCorrupt(String),
    #[error("bad flow magic {0}")]
    BadMagic(f32),
    #[error("file truncated: need {expected} bytes, have {actual}")]
    TruncatedFile { expected: usize, actual: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("mask value {value} at ({x}, {y}) is not 0 or 255")]
    NonBinaryMask { value: u8, x: usize, y: usize },
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("line {line} is not newline-terminated (file truncated?)")]
    UnterminatedLine { line: usize },
}

impl FormatError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse {
            line,
            message: message.into(),
        }
    }

    /// True for failures of the filesystem rather than of file contents.
    pub fn is_io(&self) -> bool {
        matches!(self, FormatError::Io { .. } | FormatError::MissingFile(_))
    }
}

/// Text files end with a newline; a missing one means the last line may be
/// cut short.
pub(crate) fn check_terminated(text: &str) -> Result<(), FormatError> {
    if text.is_empty() || text.ends_with('\n') {
        Ok(())
    } else {
        Err(FormatError::UnterminatedLine {
            line: text.lines().count(),
        })
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| FormatError::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String, FormatError> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|_| FormatError::FileCorrupt(format!("{}: not UTF-8", path.display())))
}
