use std::collections::VecDeque;

use image::RgbImage;

use super::MaskError;
use crate::geometry::FlowField;
use crate::raster::{BinaryMask, DepthMap};

/// Thresholds for region growing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowParams {
    /// Largest per-channel distance (0..1 scale) from the region's mean color.
    pub color_thresh: f64,
    /// Largest depth step between 4-neighbours, in depth units.
    pub depth_thresh: f64,
}

/// Multi-source 4-connected region growing from `seeds`.
///
/// Seeds are sorted and deduplicated first, so the result does not depend on
/// their order. Each seed starts its own region; a pixel joins the first
/// region to reach it when its color is within `color_thresh` of that
/// region's running mean and its depth within `depth_thresh` of the pixel it
/// was reached from. Seeds without valid depth are ignored.
pub fn grow_regions(
    rgb: &RgbImage,
    depth: &DepthMap,
    seeds: &[(usize, usize)],
    params: GrowParams,
) -> Result<BinaryMask, MaskError> {
    let (w, h) = (depth.width(), depth.height());
    if (rgb.width() as usize, rgb.height() as usize) != (w, h) {
        return Err(MaskError::DimensionMismatch {
            expected: (w, h),
            actual: (rgb.width() as usize, rgb.height() as usize),
        });
    }
    let mut seeds: Vec<usize> = seeds
        .iter()
        .filter(|&&(x, y)| x < w && y < h)
        .map(|&(x, y)| y * w + x)
        .collect();
    seeds.sort_unstable();
    seeds.dedup();

    let color = |i: usize| {
        let p = rgb.get_pixel((i % w) as u32, (i / w) as u32).0;
        [p[0] as f64, p[1] as f64, p[2] as f64]
    };
    let depth_at = |i: usize| depth.valid(i % w, i / w);
    let thresh = params.color_thresh * 255.0;

    let mut label = vec![u32::MAX; w * h];
    let mut sums: Vec<([f64; 3], f64)> = Vec::new();
    let mut queue = VecDeque::new();
    for &s in &seeds {
        if depth_at(s).is_none() {
            continue;
        }
        label[s] = sums.len() as u32;
        sums.push((color(s), 1.0));
        queue.push_back(s);
    }

    while let Some(p) = queue.pop_front() {
        let region = label[p] as usize;
        let dp = depth_at(p).expect("labelled pixels have depth");
        let (x, y) = (p % w, p / w);
        let neighbours = [
            (x > 0).then(|| p - 1),
            (x + 1 < w).then(|| p + 1),
            (y > 0).then(|| p - w),
            (y + 1 < h).then(|| p + w),
        ];
        for q in neighbours.into_iter().flatten() {
            if label[q] != u32::MAX {
                continue;
            }
            let Some(dq) = depth_at(q) else { continue };
            if (dq - dp).abs() > params.depth_thresh {
                continue;
            }
            let (sum, n) = sums[region];
            let c = color(q);
            if (0..3).any(|k| (c[k] - sum[k] / n).abs() > thresh) {
                continue;
            }
            label[q] = region as u32;
            sums[region] = ([sum[0] + c[0], sum[1] + c[1], sum[2] + c[2]], n + 1.0);
            queue.push_back(q);
        }
    }
    Ok(BinaryMask::from_vec(
        w,
        h,
        label.into_iter().map(|l| l != u32::MAX).collect(),
    ))
}

/// Pixels of frame `i + 1` reached by advecting the eroded interior of
/// `mask` (frame `i`) along `flow`. Falls back to the full mask when erosion
/// removes everything. A landing pixel is kept only when its color in
/// `to` is within `color_thresh` of the source pixel's color in `from`.
pub fn advect_seeds(
    mask: &BinaryMask,
    flow: &FlowField,
    from: &RgbImage,
    to: &RgbImage,
    color_thresh: f64,
) -> Vec<(usize, usize)> {
    let (w, h) = mask.dims();
    let interior = mask.erode3();
    let source = if interior.is_empty() { mask } else { &interior };
    let thresh = color_thresh * 255.0;
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !source.get(x, y) {
                continue;
            }
            let Some((du, dv)) = flow.get(x, y) else { continue };
            let (u, v) = (x as f64 + 0.5 + du, y as f64 + 0.5 + dv);
            if !(u >= 0.0 && v >= 0.0 && u < w as f64 && v < h as f64) {
                continue;
            }
            let (tx, ty) = (u as usize, v as usize);
            let a = from.get_pixel(x as u32, y as u32).0;
            let b = to.get_pixel(tx as u32, ty as u32).0;
            if (0..3).all(|c| (a[c] as f64 - b[c] as f64).abs() <= thresh) {
                out.push((tx, ty));
            }
        }
    }
    out
}

/// Grows object masks at frame 0 from `seeds` and carries them forward
/// through the sequence with the forward flows, regrowing at every frame.
///
/// `evidence[i]`, when given, is merged into frame `i` before the closing
/// step, so every output is a superset of it.
pub fn propagate_object_masks(
    seeds: &[(usize, usize)],
    rgb: &[RgbImage],
    depth: &[DepthMap],
    forward: &[Option<FlowField>],
    evidence: Option<&[BinaryMask]>,
    params: GrowParams,
) -> Result<Vec<BinaryMask>, MaskError> {
    let n = depth.len();
    if rgb.len() != n || evidence.is_some_and(|e| e.len() != n) {
        return Err(MaskError::FrameCountMismatch {
            expected: n,
            actual: if rgb.len() != n { rgb.len() } else { evidence.map_or(0, |e| e.len()) },
        });
    }
    let mut out: Vec<BinaryMask> = Vec::with_capacity(n);
    for i in 0..n {
        let frame_seeds = if i == 0 {
            seeds.to_vec()
        } else {
            let prev = &out[i - 1];
            if prev.is_empty() {
                Vec::new()
            } else {
                match &forward[i - 1] {
                    Some(f) => advect_seeds(prev, f, &rgb[i - 1], &rgb[i], params.color_thresh),
                    None => return Err(MaskError::MissingFlowHop { frame: i }),
                }
            }
        };
        let mut mask = grow_regions(&rgb[i], &depth[i], &frame_seeds, params)?;
        if let Some(ev) = evidence {
            if ev[i].dims() != mask.dims() {
                return Err(MaskError::DimensionMismatch {
                    expected: mask.dims(),
                    actual: ev[i].dims(),
                });
            }
            mask = mask.union(&ev[i]);
        }
        out.push(mask.close3());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use proptest::prelude::*;

    const PARAMS: GrowParams = GrowParams {
        color_thresh: 30.0 / 255.0,
        depth_thresh: 0.05,
    };

    /// Grey background at depth 3 with a red square at depth 2.
    fn square_scene(w: usize, h: usize, x0: usize, y0: usize, s: usize) -> (RgbImage, DepthMap) {
        let inside = |x: usize, y: usize| x >= x0 && x < x0 + s && y >= y0 && y < y0 + s;
        let rgb = RgbImage::from_fn(w as u32, h as u32, |x, y| {
            if inside(x as usize, y as usize) {
                Rgb([200, 20, 20])
            } else {
                Rgb([120, 120, 120])
            }
        });
        let mut d = DepthMap::filled(w, h, 3.0);
        for y in 0..h {
            for x in 0..w {
                if inside(x, y) {
                    d.set(x, y, 2.0);
                }
            }
        }
        (rgb, d)
    }

    #[test]
    fn grows_exactly_the_object() {
        let (rgb, d) = square_scene(20, 16, 5, 4, 6);
        let m = grow_regions(&rgb, &d, &[(7, 6)], PARAMS).unwrap();
        assert_eq!(m.count(), 36);
        assert!(m.get(5, 4) && m.get(10, 9) && !m.get(11, 9));
    }

    #[test]
    fn no_seeds_no_mask() {
        let (rgb, d) = square_scene(20, 16, 5, 4, 6);
        assert!(grow_regions(&rgb, &d, &[], PARAMS).unwrap().is_empty());
    }

    #[test]
    fn invalid_depth_blocks_growth() {
        let (rgb, mut d) = square_scene(20, 16, 5, 4, 6);
        d.set(7, 6, 0.0);
        assert!(grow_regions(&rgb, &d, &[(7, 6)], PARAMS).unwrap().is_empty());
    }

    #[test]
    fn propagation_follows_flow() {
        let (w, h) = (24, 16);
        let frames: Vec<_> = (0..4).map(|i| square_scene(w, h, 3 + 2 * i, 5, 6)).collect();
        let rgb: Vec<_> = frames.iter().map(|f| f.0.clone()).collect();
        let depth: Vec<_> = frames.iter().map(|f| f.1.clone()).collect();
        let flows: Vec<Option<FlowField>> = (0..4).map(|_| Some(FlowField::uniform(w, h, 2.0, 0.0))).collect();
        let masks = propagate_object_masks(&[(5, 7)], &rgb, &depth, &flows, None, PARAMS).unwrap();
        for (i, m) in masks.iter().enumerate() {
            assert_eq!(m.count(), 36, "frame {i}");
            assert!(m.get(3 + 2 * i, 5));
        }
    }

    #[test]
    fn evidence_is_kept() {
        let (rgb, d) = square_scene(12, 12, 2, 2, 4);
        let mut ev = BinaryMask::new(12, 12);
        ev.set(10, 10, true);
        let masks = propagate_object_masks(&[], &[rgb], &[d], &[None], Some(&[ev.clone()]), PARAMS).unwrap();
        assert!(ev.is_subset_of(&masks[0]));
    }

    proptest! {
        #[test]
        fn seed_order_does_not_matter(
            seeds in prop::collection::vec((0usize..20, 0usize..16), 0..12),
            rot in 0usize..12,
        ) {
            let (rgb, d) = square_scene(20, 16, 5, 4, 6);
            let a = grow_regions(&rgb, &d, &seeds, PARAMS).unwrap();
            let mut shuffled = seeds.clone();
            shuffled.reverse();
            if !shuffled.is_empty() {
                let r = rot % shuffled.len();
                shuffled.rotate_left(r);
            }
            let b = grow_regions(&rgb, &d, &shuffled, PARAMS).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
