use image::RgbImage;

use super::EvalError;
use crate::par::{map_range, Execution};
use crate::raster::BinaryMask;

/// Interleaved RGB image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageF64 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

impl ImageF64 {
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Self {
        let data = (0..width * height).map(|i| f(i % width, i / width)).collect();
        Self { width, height, data }
    }

    pub fn from_rgb(img: &RgbImage) -> Self {
        Self::from_fn(img.width() as usize, img.height() as usize, |x, y| {
            img.get_pixel(x as u32, y as u32).0.map(|c| c as f64 / 255.0)
        })
    }

    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMetrics {
    pub mse: f64,
    pub rmse: f64,
    /// `+inf` when the images agree exactly on the evaluated pixels.
    pub psnr: f64,
    pub ssim: f64,
    pub pixels: usize,
}

const SSIM_RADIUS: isize = 5;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn gaussian_window() -> Vec<f64> {
    let n = (2 * SSIM_RADIUS + 1) as usize;
    let mut w = Vec::with_capacity(n * n);
    for dy in -SSIM_RADIUS..=SSIM_RADIUS {
        for dx in -SSIM_RADIUS..=SSIM_RADIUS {
            w.push((-((dx * dx + dy * dy) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp());
        }
    }
    w
}

/// Mean SSIM over the evaluated pixels. Each local window uses only
/// in-image, evaluated neighbours, with the Gaussian weights renormalised.
fn ssim(a: &ImageF64, b: &ImageF64, eval: &dyn Fn(usize) -> bool) -> f64 {
    let g = gaussian_window();
    let (w, h) = (a.width as isize, a.height as isize);
    let side = (2 * SSIM_RADIUS + 1) as usize;
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if !eval(i) {
                continue;
            }
            let mut acc = [[0.0f64; 5]; 3];
            let mut wsum = 0.0;
            for dy in -SSIM_RADIUS..=SSIM_RADIUS {
                for dx in -SSIM_RADIUS..=SSIM_RADIUS {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = (ny * w + nx) as usize;
                    if !eval(j) {
                        continue;
                    }
                    let wt = g[(dy + SSIM_RADIUS) as usize * side + (dx + SSIM_RADIUS) as usize];
                    wsum += wt;
                    for (c, s) in acc.iter_mut().enumerate() {
                        let (p, q) = (a.data[j][c], b.data[j][c]);
                        s[0] += wt * p;
                        s[1] += wt * q;
                        s[2] += wt * p * p;
                        s[3] += wt * q * q;
                        s[4] += wt * p * q;
                    }
                }
            }
            let mut local = 0.0;
            for s in &acc {
                let (mx, my) = (s[0] / wsum, s[1] / wsum);
                let vx = (s[2] / wsum - mx * mx).max(0.0);
                let vy = (s[3] / wsum - my * my).max(0.0);
                let cxy = s[4] / wsum - mx * my;
                local += ((2.0 * mx * my + C1) * (2.0 * cxy + C2))
                    / ((mx * mx + my * my + C1) * (vx + vy + C2));
            }
            total += local / 3.0;
            count += 1;
        }
    }
    if count == 0 {
        1.0
    } else {
        total / count as f64
    }
}

/// MSE, RMSE, PSNR (peak 1) and SSIM over the pixels where `eval` is set,
/// or over all pixels when `eval` is `None`.
pub fn image_metrics(
    a: &ImageF64,
    b: &ImageF64,
    eval: Option<&BinaryMask>,
) -> Result<PairMetrics, EvalError> {
    if a.dims() != b.dims() {
        return Err(EvalError::DimensionMismatch {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    if let Some(m) = eval {
        if m.dims() != a.dims() {
            return Err(EvalError::MaskMismatch {
                expected: a.dims(),
                actual: m.dims(),
            });
        }
    }
    let use_px = |i: usize| eval.is_none_or(|m| m.data()[i]);
    let mut se = 0.0;
    let mut pixels = 0usize;
    for (i, (p, q)) in a.data.iter().zip(&b.data).enumerate() {
        if !use_px(i) {
            continue;
        }
        pixels += 1;
        se += (0..3).map(|c| (p[c] - q[c]).powi(2)).sum::<f64>();
    }
    if pixels == 0 {
        return Err(EvalError::NoPixels);
    }
    let mse = se / (3 * pixels) as f64;
    let psnr = if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() };
    Ok(PairMetrics {
        mse,
        rmse: mse.sqrt(),
        psnr,
        ssim: ssim(a, b, &use_px),
        pixels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    Full,
    StaticOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub mode: MaskMode,
    pub pairs: Vec<((usize, usize), PairMetrics)>,
    /// Mean over pairs with finite PSNR.
    pub mean_psnr: f64,
    /// Pairs left out of `mean_psnr` because they matched exactly.
    pub infinite_psnr: usize,
    pub mean_ssim: f64,
    pub mean_mse: f64,
    pub mean_rmse: f64,
    pub pixels: usize,
}

/// Compares `generated[g]` against `reference[r]` for every `(g, r)` pair.
/// With `dynamic_masks` (one per reference frame), only pixels the mask
/// marks static are evaluated.
pub fn revisit_consistency(
    generated: &[ImageF64],
    reference: &[ImageF64],
    pairs: &[(usize, usize)],
    dynamic_masks: Option<&[BinaryMask]>,
    exec: Execution,
) -> Result<ConsistencyReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoPixels);
    }
    if let Some(m) = dynamic_masks {
        if m.len() != reference.len() {
            return Err(EvalError::LengthMismatch {
                estimated: m.len(),
                reference: reference.len(),
            });
        }
    }
    for &(g, r) in pairs {
        if g >= generated.len() || r >= reference.len() {
            return Err(EvalError::PairOutOfRange {
                pair: (g, r),
                generated: generated.len(),
                reference: reference.len(),
            });
        }
    }
    let results = map_range(exec, pairs.len(), |i| {
        let (g, r) = pairs[i];
        let keep = dynamic_masks.map(|m| {
            let d = &m[r];
            BinaryMask::from_vec(d.width(), d.height(), d.data().iter().map(|b| !b).collect())
        });
        image_metrics(&generated[g], &reference[r], keep.as_ref()).map(|m| ((g, r), m))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let n = results.len() as f64;
    let finite: Vec<f64> = results.iter().map(|(_, m)| m.psnr).filter(|p| p.is_finite()).collect();
    Ok(ConsistencyReport {
        mode: if dynamic_masks.is_some() {
            MaskMode::StaticOnly
        } else {
            MaskMode::Full
        },
        mean_psnr: if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        },
        infinite_psnr: results.len() - finite.len(),
        mean_ssim: results.iter().map(|(_, m)| m.ssim).sum::<f64>() / n,
        mean_mse: results.iter().map(|(_, m)| m.mse).sum::<f64>() / n,
        mean_rmse: results.iter().map(|(_, m)| m.rmse).sum::<f64>() / n,
        pixels: results.iter().map(|(_, m)| m.pixels).sum(),
        pairs: results,
    })
}
