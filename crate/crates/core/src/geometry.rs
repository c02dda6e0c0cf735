//! Rigid camera poses, pinhole projection and camera-induced flow.
//!
//! Poses are world-to-camera: `x_cam = R · x_world + t`. Trajectory files
//! store camera-to-world; [`CameraPose::from_camera_to_world`] and
//! [`CameraPose::camera_to_world`] convert between the two.
//!
//! Continuous pixel coordinates put the center of pixel `(col, row)` at
//! `(col + 0.5, row + 0.5)`; a projected point lands in pixel
//! `(floor(u), floor(v))`.

use nalgebra::{Matrix3, Rotation3, Vector3};
use thiserror::Error;

use crate::raster::{bilinear_taps, DepthMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point depth {0} is not positive")]
    NonPositiveDepth(f64),
    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    OutOfBounds {
        u: f64,
        v: f64,
        width: usize,
        height: usize,
    },
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation is not a proper orthonormal matrix (deviation {0:e})")]
    InvalidRotation(f64),
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidIntrinsics(m.to_string()));
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be nonzero");
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return bad("cx outside image");
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad("cy outside image");
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// True when continuous `(u, v)` falls inside the image rectangle.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    /// Integer pixel containing continuous `(u, v)`, if inside the image.
    pub fn pixel_of(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        self.contains(u, v)
            .then(|| (u.floor() as usize, v.floor() as usize))
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Camera-space ray direction (z = 1) through continuous pixel `(u, v)`.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Rigid world-to-camera transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

const ROTATION_TOL: f64 = 1e-9;

impl Default for CameraPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl CameraPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from an exact rotation. Fails when `R·Rᵀ ≠ I` or
    /// `det R ≠ 1` beyond 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let dev = rotation_deviation(&rotation);
        if !(dev <= ROTATION_TOL) || !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidRotation(dev));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Builds a pose after projecting `rotation` onto SO(3) with the polar
    /// decomposition. Used for values read from text files.
    pub fn from_matrix_orthonormalized(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        Self::new(orthonormalize(&rotation)?, translation)
    }

    /// Pose whose camera sits at `center` with camera-to-world rotation `r_cw`.
    pub fn from_camera_to_world(
        r_cw: Matrix3<f64>,
        center: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let r = r_cw.transpose();
        Self::new(r, -(r * center))
    }

    /// Camera at `eye` looking at `target`; `up` is the world up direction.
    /// Camera axes: x right, y down, z forward.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let z = (target - eye).normalize();
        let x = z.cross(&up);
        if !(x.norm() > 1e-9) || !z.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidRotation(f64::INFINITY));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let r_cw = Matrix3::from_columns(&[x, y, z]);
        Self::from_camera_to_world(r_cw, eye)
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Self {
            rotation: *r.matrix(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera-to-world rotation and camera center.
    pub fn camera_to_world(&self) -> (Matrix3<f64>, Vector3<f64>) {
        (self.rotation.transpose(), self.center())
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &CameraPose) -> CameraPose {
        CameraPose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> CameraPose {
        let rt = self.rotation.transpose();
        CameraPose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Maximum absolute entry difference of rotation and translation.
    pub fn max_abs_diff(&self, other: &CameraPose) -> f64 {
        let dr = (self.rotation - other.rotation).amax();
        let dt = (self.translation - other.translation).amax();
        dr.max(dt)
    }
}

/// Largest deviation of `R·Rᵀ` from identity and of `det R` from 1.
pub fn rotation_deviation(r: &Matrix3<f64>) -> f64 {
    let ortho = (r * r.transpose() - Matrix3::identity()).amax();
    let det = (r.determinant() - 1.0).abs();
    let d = ortho.max(det);
    if d.is_finite() {
        d
    } else {
        f64::INFINITY
    }
}

/// Nearest rotation to `m` in the Frobenius sense (polar factor).
pub fn orthonormalize(m: &Matrix3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::InvalidRotation(f64::INFINITY));
    }
    let svd = m.svd(true, true);
    let (Some(mut u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(GeometryError::InvalidRotation(f64::INFINITY));
    };
    if (u * v_t).determinant() < 0.0 {
        let mut last = u.column_mut(2);
        last *= -1.0;
    }
    Ok(u * v_t)
}

/// Projected pixel position plus camera-space depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Perspective projection of a camera-space point.
pub fn project(point: &Vector3<f64>, k: &CameraIntrinsics) -> Result<Projection, GeometryError> {
    let z = point.z;
    if !(z > 0.0) {
        return Err(GeometryError::NonPositiveDepth(z));
    }
    Ok(Projection {
        u: k.fx * point.x / z + k.cx,
        v: k.fy * point.y / z + k.cy,
        depth: z,
    })
}

/// Lifts continuous pixel `(u, v)` at metric depth to camera space.
/// The pixel must lie in `[0, width] × [0, height]`.
pub fn unproject(
    u: f64,
    v: f64,
    depth: f64,
    k: &CameraIntrinsics,
) -> Result<Vector3<f64>, GeometryError> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(GeometryError::NonPositiveDepth(depth));
    }
    if !(u >= 0.0 && v >= 0.0 && u <= k.width as f64 && v <= k.height as f64) {
        return Err(GeometryError::OutOfBounds {
            u,
            v,
            width: k.width,
            height: k.height,
        });
    }
    Ok(Vector3::new(
        depth * (u - k.cx) / k.fx,
        depth * (v - k.cy) / k.fy,
        depth,
    ))
}

/// Dense per-pixel displacement from one frame to another, in pixels.
///
/// Stored as `f32` to match the on-disk flow layout. Invalid pixels keep
/// whatever values they were given; readers and writers use the
/// conventional "unknown" sentinel for them.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    du: Vec<f32>,
    dv: Vec<f32>,
    valid: Vec<bool>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, du: Vec<f32>, dv: Vec<f32>, valid: Vec<bool>) -> Self {
        let n = width * height;
        assert!(du.len() == n && dv.len() == n && valid.len() == n, "flow buffer size");
        Self {
            width,
            height,
            du,
            dv,
            valid,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        Self::new(width, height, vec![0.0; n], vec![0.0; n], vec![true; n])
    }

    pub fn uniform(width: usize, height: usize, du: f32, dv: f32) -> Self {
        let n = width * height;
        Self::new(width, height, vec![du; n], vec![dv; n], vec![true; n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn du(&self) -> &[f32] {
        &self.du
    }

    pub fn dv(&self) -> &[f32] {
        &self.dv
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    /// Displacement at an integer pixel, `None` when invalid.
    pub fn get(&self, x: usize, y: usize) -> Option<(f64, f64)> {
        let i = y * self.width + x;
        self.valid[i].then(|| (self.du[i] as f64, self.dv[i] as f64))
    }

    pub fn set(&mut self, x: usize, y: usize, du: f32, dv: f32, valid: bool) {
        let i = y * self.width + x;
        self.du[i] = du;
        self.dv[i] = dv;
        self.valid[i] = valid;
    }

    pub fn scaled(&self, s: f32) -> FlowField {
        FlowField::new(
            self.width,
            self.height,
            self.du.iter().map(|v| v * s).collect(),
            self.dv.iter().map(|v| v * s).collect(),
            self.valid.clone(),
        )
    }

    /// Bilinear sample at continuous `(u, v)`. Returns `None` when outside
    /// the grid or when any tap with nonzero weight is invalid. The second
    /// value is the largest L1 spread between contributing taps, which
    /// trackers use to detect motion boundaries.
    pub fn sample(&self, u: f64, v: f64) -> Option<((f64, f64), f64)> {
        let taps = bilinear_taps(self.width, self.height, u, v)?;
        let mut acc = (0.0, 0.0);
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (idx, w) in taps {
            if w <= 0.0 {
                continue;
            }
            if !self.valid[idx] {
                return None;
            }
            let (a, b) = (self.du[idx] as f64, self.dv[idx] as f64);
            acc.0 += w * a;
            acc.1 += w * b;
            lo = (lo.0.min(a), lo.1.min(b));
            hi = (hi.0.max(a), hi.1.max(b));
        }
        Some((acc, (hi.0 - lo.0) + (hi.1 - lo.1)))
    }
}

/// Flow produced purely by camera motion: every valid pixel of frame `i`
/// is lifted with its depth, moved into camera `j` and reprojected.
/// Pixels without valid depth, or that land behind camera `j`, are invalid.
pub fn induced_flow(
    depth_i: &DepthMap,
    pose_i: &CameraPose,
    pose_j: &CameraPose,
    k: &CameraIntrinsics,
) -> Result<FlowField, GeometryError> {
    if (depth_i.width(), depth_i.height()) != (k.width, k.height) {
        return Err(GeometryError::DimensionMismatch {
            expected: (k.width, k.height),
            actual: (depth_i.width(), depth_i.height()),
        });
    }
    let relative = pose_j.compose(&pose_i.inverse());
    let stationary = pose_i == pose_j || relative == CameraPose::identity();
    let (w, h) = (k.width, k.height);
    let mut flow = FlowField::new(
        w,
        h,
        vec![0.0; w * h],
        vec![0.0; w * h],
        vec![false; w * h],
    );
    for y in 0..h {
        for x in 0..w {
            let Some(d) = depth_i.valid(x, y) else {
                continue;
            };
            if stationary {
                flow.set(x, y, 0.0, 0.0, true);
                continue;
            }
            let (u, v) = (x as f64 + 0.5, y as f64 + 0.5);
            let p = unproject(u, v, d, k)?;
            let q = relative.transform_point(&p);
            if let Ok(proj) = project(&q, k) {
                flow.set(x, y, (proj.u - u) as f32, (proj.v - v) as f32, true);
            }
        }
    }
    Ok(flow)
}
