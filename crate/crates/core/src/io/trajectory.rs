//! Camera trajectories as text, one pose per line:
//!
//! ```text
//! index tx ty tz qx qy qz qw
//! ```
//!
//! `t` is the camera center and `q` the camera-to-world rotation (Hamilton,
//! scalar last). Blank lines and `#` comments are skipped on read. The
//! writer prints every number in shortest round-trip form, so reading a
//! file written by [`encode_trajectory`] and writing it again reproduces it
//! byte for byte.

use std::path::Path;

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};

use super::{check_terminated, read_text, write_bytes, FormatError};
use crate::geometry::{orthonormalize, CameraPose, GeometryError};

const QUATERNION_NORM_TOL: f64 = 1e-3;

/// `[tx, ty, tz, qx, qy, qz, qw]` of the camera-to-world transform, with
/// `qw >= 0` and no negative zeros.
fn stored_values(pose: &CameraPose) -> [f64; 7] {
    let (r_cw, c) = pose.camera_to_world();
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r_cw));
    let sign = if q.w < 0.0 { -1.0 } else { 1.0 };
    [c.x, c.y, c.z, sign * q.i, sign * q.j, sign * q.k, sign * q.w].map(|v| v + 0.0)
}

fn pose_from_values(v: &[f64; 7]) -> Result<CameraPose, GeometryError> {
    let q = UnitQuaternion::from_quaternion(Quaternion::new(v[6], v[3], v[4], v[5]));
    let r_cw = orthonormalize(q.to_rotation_matrix().matrix())?;
    CameraPose::from_camera_to_world(r_cw, Vector3::new(v[0], v[1], v[2]))
}

/// One trajectory line, keeping the values exactly as stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    index: usize,
    position: [f64; 3],
    quaternion: [f64; 4],
    pose: CameraPose,
}

impl TrajectoryRecord {
    pub fn from_pose(index: usize, pose: CameraPose) -> Self {
        let v = stored_values(&pose);
        Self {
            index,
            position: [v[0], v[1], v[2]],
            quaternion: [v[3], v[4], v[5], v[6]],
            pose,
        }
    }

    /// Builds a record from stored values; `quaternion` is `[qx, qy, qz, qw]`.
    pub fn from_raw(
        index: usize,
        position: [f64; 3],
        quaternion: [f64; 4],
        line: usize,
    ) -> Result<Self, FormatError> {
        let [x, y, z, w] = quaternion;
        let norm = (x * x + y * y + z * z + w * w).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > QUATERNION_NORM_TOL {
            return Err(FormatError::NonUnitQuaternion { line, norm });
        }
        if !position.iter().all(|v| v.is_finite()) {
            return Err(FormatError::parse(line, "non-finite position"));
        }
        let [px, py, pz] = position;
        let pose = pose_from_values(&[px, py, pz, x, y, z, w])
            .map_err(|e| FormatError::parse(line, e.to_string()))?;
        Ok(Self {
            index,
            position,
            quaternion,
            pose,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// World-to-camera pose.
    pub fn pose(&self) -> &CameraPose {
        &self.pose
    }

    pub fn position(&self) -> [f64; 3] {
        self.position
    }

    pub fn quaternion(&self) -> [f64; 4] {
        self.quaternion
    }
}

pub fn decode_trajectory(text: &str) -> Result<Vec<TrajectoryRecord>, FormatError> {
    check_terminated(text)?;
    let mut out: Vec<TrajectoryRecord> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(FormatError::parse(
                line,
                format!("expected 8 fields, found {}", fields.len()),
            ));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| FormatError::parse(line, format!("bad frame index {:?}", fields[0])))?;
        let mut vals = [0.0f64; 7];
        for (slot, f) in vals.iter_mut().zip(&fields[1..]) {
            *slot = f
                .parse()
                .map_err(|_| FormatError::parse(line, format!("bad number {f:?}")))?;
        }
        if let Some(prev) = out.last() {
            if index <= prev.index {
                return Err(FormatError::parse(
                    line,
                    format!("frame index {index} not increasing (previous {})", prev.index),
                ));
            }
        }
        out.push(TrajectoryRecord::from_raw(
            index,
            [vals[0], vals[1], vals[2]],
            [vals[3], vals[4], vals[5], vals[6]],
            line,
        )?);
    }
    Ok(out)
}

pub fn encode_trajectory(records: &[TrajectoryRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let [tx, ty, tz] = r.position;
        let [qx, qy, qz, qw] = r.quaternion;
        s.push_str(&format!("{} {tx} {ty} {tz} {qx} {qy} {qz} {qw}\n", r.index));
    }
    s
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRecord>, FormatError> {
    decode_trajectory(&read_text(path)?)
}

pub fn write_trajectory(path: &Path, records: &[TrajectoryRecord]) -> Result<(), FormatError> {
    write_bytes(path, encode_trajectory(records).as_bytes())
}

/// Records for consecutive frame indices starting at 0.
pub fn records_from_poses(poses: &[CameraPose]) -> Vec<TrajectoryRecord> {
    poses
        .iter()
        .enumerate()
        .map(|(i, p)| TrajectoryRecord::from_pose(i, *p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn identity_line() {
        let recs = decode_trajectory("0 0 0 0 0 0 0 1\n").unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].pose().max_abs_diff(&CameraPose::identity()), 0.0);
        assert_eq!(encode_trajectory(&recs), "0 0 0 0 0 0 0 1\n");
    }

    #[test]
    fn quarter_turn_about_z() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let recs = decode_trajectory(&format!("0 0 0 0 0 0 {s} {s}\n")).unwrap();
        let (r_cw, _) = recs[0].pose().camera_to_world();
        // Rz(90°) maps x to y.
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r_cw - expected).amax() < 1e-12);
    }

    #[test]
    fn camera_center_is_stored_translation() {
        let recs = decode_trajectory("3 1 2 3 0 0 0 1\n").unwrap();
        let pose = recs[0].pose();
        assert!((pose.center() - Vector3::new(1.0, 2.0, 3.0)).amax() < 1e-15);
        assert!((pose.translation() + Vector3::new(1.0, 2.0, 3.0)).amax() < 1e-15);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = decode_trajectory("# hdr\n0 0 0 0 0 0 0 1\n1 0 0 x 0 0 0 1\n").unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 3, .. }));
        let err = decode_trajectory("0 0 0 0 0 0 0 1.01\n").unwrap_err();
        assert!(matches!(err, FormatError::NonUnitQuaternion { line: 1, .. }));
        let err = decode_trajectory("1 0 0 0 0 0 0 1\n1 0 0 0 0 0 0 1\n").unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 2, .. }));
        assert!(decode_trajectory("0 0 0 0 0 0 0.0005 1.0\n").is_ok());
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let poses: Vec<CameraPose> = (0..20)
            .map(|i| {
                let a = i as f64 * 0.37;
                CameraPose::from_axis_angle(
                    Vector3::new(a.sin(), 1.0, a.cos()),
                    a,
                    Vector3::new(a, -2.0 * a, 0.1 * a * a),
                )
            })
            .collect();
        let first = encode_trajectory(&records_from_poses(&poses));
        let second = encode_trajectory(&decode_trajectory(&first).unwrap());
        assert_eq!(first, second);
        for (p, r) in poses.iter().zip(decode_trajectory(&first).unwrap()) {
            assert!(p.max_abs_diff(r.pose()) < 1e-12);
        }
    }
}
