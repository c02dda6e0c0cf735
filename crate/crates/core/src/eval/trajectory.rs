use nalgebra::{Matrix3, Vector3};

use super::EvalError;
use crate::geometry::CameraPose;

/// Closed-form least-squares similarity `dst ≈ s·R·src + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Similarity {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }
}

/// Umeyama alignment of `src` onto `dst`. Needs at least three points that
/// are not collinear.
pub fn umeyama(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<Similarity, EvalError> {
    if src.len() != dst.len() {
        return Err(EvalError::LengthMismatch {
            estimated: src.len(),
            reference: dst.len(),
        });
    }
    let n = src.len();
    if n < 3 {
        return Err(EvalError::DegenerateTrajectory(format!("{n} cameras, need at least 3")));
    }
    let nf = n as f64;
    let mu_s = src.iter().sum::<Vector3<f64>>() / nf;
    let mu_d = dst.iter().sum::<Vector3<f64>>() / nf;
    let mut cov = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let (a, b) = (s - mu_s, d - mu_d);
        cov += b * a.transpose();
        scatter += a * a.transpose();
    }
    cov /= nf;
    scatter /= nf;
    let var_s = scatter.trace();
    let spread = scatter.symmetric_eigenvalues();
    let mut ev = [spread[0], spread[1], spread[2]];
    ev.sort_by(f64::total_cmp);
    if !(var_s > 0.0) || ev[1] <= 1e-12 * ev[2] {
        return Err(EvalError::DegenerateTrajectory(
            "camera centers are coincident or collinear".into(),
        ));
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^T"));
    let mut s = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let rotation = u * s * v_t;
    let d = svd.singular_values;
    let scale = (d[0] * s[(0, 0)] + d[1] * s[(1, 1)] + d[2] * s[(2, 2)]) / var_s;
    let translation = mu_d - scale * (rotation * mu_s);
    Ok(Similarity {
        rotation,
        translation,
        scale,
    })
}

/// Geodesic angle between two rotations, in radians.
pub fn rotation_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let r = a * b.transpose();
    let sin = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm() / 2.0;
    let cos = (r.trace() - 1.0) / 2.0;
    sin.atan2(cos)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryErrors {
    /// Degrees.
    pub rotation: Vec<f64>,
    /// Camera-center distance, in reference units.
    pub translation: Vec<f64>,
    pub cammc: Vec<f64>,
    pub m_rot_err: f64,
    pub m_trans_err: f64,
    pub m_cammc: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn path_length(centers: &[Vector3<f64>]) -> f64 {
    centers.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Per-frame rotation, translation and extrinsic-matrix errors.
///
/// Translation error is the distance between camera centers. With `align`,
/// the estimated cameras are first mapped onto the reference by the
/// similarity that best aligns their centers. The extrinsic error compares
/// camera-to-world `[R | c / L]` matrices, `L` being the reference path
/// length (1 when the reference does not move).
pub fn camera_errors(
    estimated: &[CameraPose],
    reference: &[CameraPose],
    align: bool,
) -> Result<TrajectoryErrors, EvalError> {
    if estimated.len() != reference.len() {
        return Err(EvalError::LengthMismatch {
            estimated: estimated.len(),
            reference: reference.len(),
        });
    }
    if estimated.is_empty() {
        return Err(EvalError::DegenerateTrajectory("empty trajectory".into()));
    }
    let mut est: Vec<(Matrix3<f64>, Vector3<f64>)> = estimated.iter().map(CameraPose::camera_to_world).collect();
    let refs: Vec<(Matrix3<f64>, Vector3<f64>)> = reference.iter().map(CameraPose::camera_to_world).collect();
    if align {
        let src: Vec<_> = est.iter().map(|e| e.1).collect();
        let dst: Vec<_> = refs.iter().map(|r| r.1).collect();
        let sim = umeyama(&src, &dst)?;
        for e in &mut est {
            *e = (sim.rotation * e.0, sim.apply(&e.1));
        }
    }
    let ref_centers: Vec<_> = refs.iter().map(|r| r.1).collect();
    let len = path_length(&ref_centers);
    let norm = if len > 0.0 { len } else { 1.0 };
    let mut rotation = Vec::with_capacity(est.len());
    let mut translation = Vec::with_capacity(est.len());
    let mut cammc = Vec::with_capacity(est.len());
    for ((re, ce), (rr, cr)) in est.iter().zip(&refs) {
        rotation.push(rotation_angle(re, rr).to_degrees());
        translation.push((ce - cr).norm());
        let dr = (re - rr).norm_squared();
        let dc = ((ce - cr) / norm).norm_squared();
        cammc.push((dr + dc).sqrt());
    }
    Ok(TrajectoryErrors {
        m_rot_err: mean(&rotation),
        m_trans_err: mean(&translation),
        m_cammc: mean(&cammc),
        rotation,
        translation,
        cammc,
    })
}

/// RMSE of camera-center residuals after similarity alignment.
pub fn ate(estimated: &[CameraPose], reference: &[CameraPose]) -> Result<f64, EvalError> {
    let src: Vec<_> = estimated.iter().map(CameraPose::center).collect();
    let dst: Vec<_> = reference.iter().map(CameraPose::center).collect();
    let sim = umeyama(&src, &dst)?;
    let sq: f64 = src
        .iter()
        .zip(&dst)
        .map(|(s, d)| (sim.apply(s) - d).norm_squared())
        .sum();
    Ok((sq / src.len() as f64).sqrt())
}

/// For each generated pose, the reference frame minimising
/// `center distance + rot_weight · geodesic angle (rad)`. Ties go to the
/// smaller reference index. A heuristic for finding revisited viewpoints.
pub fn pair_by_nearest_pose(
    generated: &[CameraPose],
    reference: &[CameraPose],
    rot_weight: f64,
) -> Vec<(usize, usize)> {
    if reference.is_empty() {
        return Vec::new();
    }
    generated
        .iter()
        .enumerate()
        .map(|(g, gp)| {
            let (gr, gc) = gp.camera_to_world();
            let cost = |r: &CameraPose| {
                let (rr, rc) = r.camera_to_world();
                (gc - rc).norm() + rot_weight * rotation_angle(&gr, &rr)
            };
            let best = (0..reference.len())
                .min_by(|&a, &b| cost(&reference[a]).total_cmp(&cost(&reference[b])).then(a.cmp(&b)))
                .expect("reference is nonempty");
            (g, best)
        })
        .collect()
}
