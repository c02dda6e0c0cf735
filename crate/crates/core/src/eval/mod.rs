//! Trajectory and image-consistency metrics.

mod image;
mod trajectory;

use std::fmt::Write as _;

use thiserror::Error;

pub use image::{image_metrics, revisit_consistency, ConsistencyReport, ImageF64, MaskMode, PairMetrics};
pub use trajectory::{
    ate, camera_errors, pair_by_nearest_pose, rotation_angle, umeyama, Similarity,
    TrajectoryErrors,
};

use crate::raster::BinaryMask;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("trajectory lengths differ: {estimated} vs {reference}")]
    LengthMismatch { estimated: usize, reference: usize },
    #[error("degenerate trajectory: {0}")]
    DegenerateTrajectory(String),
    #[error("pair {pair:?} out of range ({generated} generated, {reference} reference frames)")]
    PairOutOfRange {
        pair: (usize, usize),
        generated: usize,
        reference: usize,
    },
    #[error("mask is {actual:?}, images are {expected:?}")]
    MaskMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("nothing to evaluate")]
    NoPixels,
}

/// Intersection over union; two empty masks count as a perfect match.
pub fn mask_iou(predicted: &BinaryMask, truth: &BinaryMask) -> Result<f64, EvalError> {
    let ignore = BinaryMask::new(truth.width(), truth.height());
    mask_iou_ignoring(predicted, truth, &ignore)
}

/// [`mask_iou`] computed only over pixels not set in `ignore`.
pub fn mask_iou_ignoring(
    predicted: &BinaryMask,
    truth: &BinaryMask,
    ignore: &BinaryMask,
) -> Result<f64, EvalError> {
    for m in [predicted, ignore] {
        if m.dims() != truth.dims() {
            return Err(EvalError::DimensionMismatch {
                expected: truth.dims(),
                actual: m.dims(),
            });
        }
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for ((&p, &t), &skip) in predicted.data().iter().zip(truth.data()).zip(ignore.data()) {
        if skip {
            continue;
        }
        inter += (p && t) as usize;
        union += (p || t) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

fn fmt_f(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.9}")
    }
}

/// Flat `key value` report text.
pub fn report_text(traj: Option<&TrajectoryErrors>, ate_rmse: Option<f64>, cons: Option<&ConsistencyReport>) -> String {
    let mut s = String::new();
    if let Some(t) = traj {
        let _ = writeln!(s, "frames {}", t.rotation.len());
        let _ = writeln!(s, "mRotErr_deg {}", fmt_f(t.m_rot_err));
        let _ = writeln!(s, "mTransErr {}", fmt_f(t.m_trans_err));
        let _ = writeln!(s, "mCamMC {}", fmt_f(t.m_cammc));
    }
    if let Some(a) = ate_rmse {
        let _ = writeln!(s, "ATE {}", fmt_f(a));
    }
    if let Some(c) = cons {
        let mode = match c.mode {
            MaskMode::Full => "full",
            MaskMode::StaticOnly => "static-only",
        };
        let _ = writeln!(s, "mask_mode {mode}");
        let _ = writeln!(s, "pairs {}", c.pairs.len());
        let _ = writeln!(s, "pixels {}", c.pixels);
        let _ = writeln!(s, "PSNR {}", fmt_f(c.mean_psnr));
        let _ = writeln!(s, "PSNR_inf_excluded {}", c.infinite_psnr);
        let _ = writeln!(s, "SSIM {}", fmt_f(c.mean_ssim));
        let _ = writeln!(s, "MSE {}", fmt_f(c.mean_mse));
        let _ = writeln!(s, "RMSE {}", fmt_f(c.mean_rmse));
        for ((g, r), m) in &c.pairs {
            let _ = writeln!(
                s,
                "pair {g} {r} psnr={} ssim={} mse={} rmse={}",
                fmt_f(m.psnr),
                fmt_f(m.ssim),
                fmt_f(m.mse),
                fmt_f(m.rmse)
            );
        }
    }
    s
}
