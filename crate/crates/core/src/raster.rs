//! Dense per-pixel containers shared by every stage: depth maps and binary
//! masks, plus the 3×3 morphology used on masks.

/// Metric depth (camera z) per pixel, row-major. Values that are not finite
/// or not strictly positive mark invalid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "depth buffer size");
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, depth: f64) -> Self {
        Self::new(width, height, vec![depth; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, depth: f64) {
        self.data[y * self.width + x] = depth;
    }

    /// Valid depth at `(x, y)`, if any.
    pub fn valid(&self, x: usize, y: usize) -> Option<f64> {
        let d = self.get(x, y);
        (d.is_finite() && d > 0.0).then_some(d)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.width,
            self.height,
            self.data.iter().map(|d| d * factor).collect(),
        )
    }
}

/// Binary per-pixel map. `true` means dynamic for every mask in this crate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width * height, "mask buffer size");
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
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

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Pixel-wise OR. Panics on size mismatch.
    pub fn union(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!(self.dims(), other.dims());
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| *a || *b)
            .collect();
        Self::from_vec(self.width, self.height, data)
    }

    /// True if every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.data.iter().zip(&other.data).all(|(a, b)| !a || *b)
    }

    pub fn dilate3(&self) -> BinaryMask {
        self.morph3(true, None)
    }

    pub fn erode3(&self) -> BinaryMask {
        self.morph3(false, None)
    }

    /// Erosion followed by dilation, 3×3 square element.
    pub fn open3(&self) -> BinaryMask {
        self.erode3().dilate3()
    }

    /// Dilation followed by erosion, 3×3 square element. The erosion treats
    /// the outside of the image as unset, so gaps between a region and the
    /// frame edge are not filled; the input is always kept.
    pub fn close3(&self) -> BinaryMask {
        self.union(&self.dilate3().morph3(false, Some(false)))
    }

    // With `border` unset, out-of-image neighbours are ignored, so border
    // pixels are neither eroded nor grown by the frame edge.
    fn morph3(&self, dilate: bool, border: Option<bool>) -> BinaryMask {
        let (w, h) = (self.width as isize, self.height as isize);
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            let (x, y) = (x as isize, y as isize);
            let mut acc = !dilate;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    let v = if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        match border {
                            Some(b) => b,
                            None => continue,
                        }
                    } else {
                        self.data[(ny * w + nx) as usize]
                    };
                    if dilate {
                        acc |= v;
                    } else {
                        acc &= v;
                    }
                }
            }
            acc
        })
    }

    /// Pixels within `radius` (Chebyshev) of a set/unset transition.
    pub fn boundary_band(&self, radius: usize) -> BinaryMask {
        let mut grown = self.clone();
        let mut shrunk = self.clone();
        for _ in 0..radius {
            grown = grown.dilate3();
            shrunk = shrunk.erode3();
        }
        let data = grown
            .data
            .iter()
            .zip(&shrunk.data)
            .map(|(g, s)| *g && !*s)
            .collect();
        BinaryMask::from_vec(self.width, self.height, data)
    }
}

/// Bilinear sample of a row-major scalar grid whose samples sit at pixel
/// centers `(x + 0.5, y + 0.5)`. Returns the four tap indices together with
/// their weights so callers can check tap validity. `None` when the
/// position lies outside the span of pixel centers (clamped at half a pixel
/// from the border).
pub fn bilinear_taps(width: usize, height: usize, u: f64, v: f64) -> Option<[(usize, f64); 4]> {
    if !(u.is_finite() && v.is_finite()) {
        return None;
    }
    if u < 0.0 || v < 0.0 || u > width as f64 || v > height as f64 {
        return None;
    }
    let fx = (u - 0.5).clamp(0.0, (width - 1) as f64);
    let fy = (v - 0.5).clamp(0.0, (height - 1) as f64);
    let x0 = fx.floor() as usize;
    let y0 = fy.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let ax = fx - x0 as f64;
    let ay = fy - y0 as f64;
    Some([
        (y0 * width + x0, (1.0 - ax) * (1.0 - ay)),
        (y0 * width + x1, ax * (1.0 - ay)),
        (y1 * width + x0, (1.0 - ax) * ay),
        (y1 * width + x1, ax * ay),
    ])
}
