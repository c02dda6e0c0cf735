use super::MaskError;
use crate::geometry::FlowField;
use crate::raster::BinaryMask;

/// Marks pixels whose observed flow disagrees with the camera-induced flow
/// by more than `tau` pixels in L1 (`|Δu| + |Δv|`). Pixels invalid in either
/// field stay static.
pub fn pixel_motion_mask(
    optical: &FlowField,
    warp: &FlowField,
    tau: f64,
) -> Result<BinaryMask, MaskError> {
    if optical.dims() != warp.dims() {
        return Err(MaskError::DimensionMismatch {
            expected: optical.dims(),
            actual: warp.dims(),
        });
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(MaskError::InvalidConfig(format!("tau must be positive, got {tau}")));
    }
    let (w, h) = optical.dims();
    let data = (0..w * h)
        .map(|i| {
            if !(optical.valid()[i] && warp.valid()[i]) {
                return false;
            }
            let r = (optical.du()[i] as f64 - warp.du()[i] as f64).abs()
                + (optical.dv()[i] as f64 - warp.dv()[i] as f64).abs();
            r > tau
        })
        .collect();
    Ok(BinaryMask::from_vec(w, h, data))
}

/// Concatenates `first` (a→b) with `second` (b→c) into a→c by sampling
/// `second` bilinearly at the displaced positions.
pub fn chain_flows(first: &FlowField, second: &FlowField) -> Result<FlowField, MaskError> {
    if first.dims() != second.dims() {
        return Err(MaskError::DimensionMismatch {
            expected: first.dims(),
            actual: second.dims(),
        });
    }
    let (w, h) = first.dims();
    let mut out = FlowField::new(w, h, vec![0.0; w * h], vec![0.0; w * h], vec![false; w * h]);
    for y in 0..h {
        for x in 0..w {
            let Some((du, dv)) = first.get(x, y) else { continue };
            let (u, v) = (x as f64 + 0.5 + du, y as f64 + 0.5 + dv);
            if let Some(((du2, dv2), _)) = second.sample(u, v) {
                out.set(x, y, (du + du2) as f32, (dv + dv2) as f32, true);
            }
        }
    }
    Ok(out)
}
