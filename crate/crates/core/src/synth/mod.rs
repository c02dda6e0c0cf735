//! Deterministic ray-cast RGB-D sequences with exact ground truth.
//!
//! Every pixel ray is intersected analytically with the scene, so depth,
//! optical flow and dynamic masks are exact. The generator is the oracle
//! the rest of the crate is tested against: analytic flow is computed from
//! the known 3D hit point and object motion, independently of
//! [`crate::geometry::induced_flow`], which works from the depth map.

mod presets;
mod spec;

use image::{Rgb, RgbImage};
use nalgebra::Vector3;
use thiserror::Error;

pub use presets::{dynamic_suite, late_mover, moving_box, static_room, static_suite, two_objects};
pub use spec::{Aabb, CameraKey, Material, Mover, SceneSpec, StaticBox, FAR_PLANE, SCENE_HEADER};

use crate::geometry::{project, CameraPose, FlowField};
use crate::io::{Frame, Sequence};
use crate::par::{map_range, Execution};
use crate::raster::{BinaryMask, DepthMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("scene spec line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl SynthError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        SynthError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// Generated sequence plus ground truth.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Frames carry RGB, exact depth, analytic forward/backward flow and the
    /// object-level mask as `mask`.
    pub sequence: Sequence,
    /// Pixels whose ray hits an object that moves at some point of the
    /// sequence.
    pub object_masks: Vec<BinaryMask>,
    /// Pixels whose ray hits an object that is moving at that frame.
    pub instant_masks: Vec<BinaryMask>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Surface {
    Room,
    Static(usize),
    Mover(usize),
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    t: f64,
    axis: usize,
    sign: f64,
    surface: Surface,
}

/// Per-pixel ray-cast result for one camera.
struct View {
    width: usize,
    height: usize,
    hits: Vec<Option<(Hit, Vector3<f64>)>>,
}

const LIGHT: [f64; 3] = [0.32, 0.85, -0.42];

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn lattice(seed: u64, surface: u64, i: i64, j: i64) -> f64 {
    let h = splitmix(seed ^ splitmix(surface ^ splitmix(i as u64 ^ splitmix(j as u64))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(seed: u64, surface: u64, x: f64, y: f64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (i, j) = (fx as i64, fy as i64);
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let (sx, sy) = (smooth(x - fx), smooth(y - fy));
    let a = lattice(seed, surface, i, j);
    let b = lattice(seed, surface, i + 1, j);
    let c = lattice(seed, surface, i, j + 1);
    let d = lattice(seed, surface, i + 1, j + 1);
    let top = a + (b - a) * sx;
    let bottom = c + (d - c) * sx;
    top + (bottom - top) * sy
}

/// Slab test against a box seen from outside. Returns entry distance and face.
fn ray_box(o: &Vector3<f64>, d: &Vector3<f64>, b: &Aabb) -> Option<(f64, usize, f64)> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    let mut axis = 0;
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a] < b.min[a] || o[a] > b.max[a] {
                return None;
            }
            continue;
        }
        let t1 = (b.min[a] - o[a]) / d[a];
        let t2 = (b.max[a] - o[a]) / d[a];
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        if lo > t_enter {
            t_enter = lo;
            axis = a;
        }
        t_exit = t_exit.min(hi);
    }
    (t_enter <= t_exit && t_enter > 1e-9).then(|| (t_enter, axis, -d[axis].signum()))
}

/// Exit distance of a ray starting inside a box.
fn ray_shell(o: &Vector3<f64>, d: &Vector3<f64>, b: &Aabb) -> Option<(f64, usize, f64)> {
    let mut best: Option<(f64, usize, f64)> = None;
    for a in 0..3 {
        if d[a] == 0.0 {
            continue;
        }
        let bound = if d[a] > 0.0 { b.max[a] } else { b.min[a] };
        let t = (bound - o[a]) / d[a];
        if t > 1e-9 && best.is_none_or(|(bt, _, _)| t < bt) {
            best = Some((t, a, -d[a].signum()));
        }
    }
    best
}

impl SceneSpec {
    fn cast(&self, pose: &CameraPose, frame: Option<usize>) -> View {
        let k = &self.intrinsics;
        let (r_cw, origin) = pose.camera_to_world();
        let movers: Vec<Aabb> = match frame {
            Some(f) => self.movers.iter().map(|m| m.bounds_at(f)).collect(),
            None => Vec::new(),
        };
        let mut hits = Vec::with_capacity(k.pixel_count());
        for y in 0..k.height {
            for x in 0..k.width {
                let dir = r_cw * k.ray(x as f64 + 0.5, y as f64 + 0.5);
                let mut best: Option<Hit> = None;
                let mut consider = |cand: Option<(f64, usize, f64)>, surface| {
                    if let Some((t, axis, sign)) = cand {
                        if best.is_none_or(|b| t < b.t) {
                            best = Some(Hit {
                                t,
                                axis,
                                sign,
                                surface,
                            });
                        }
                    }
                };
                if let Some((room, _)) = &self.room {
                    consider(ray_shell(&origin, &dir, room), Surface::Room);
                }
                for (i, b) in self.boxes.iter().enumerate() {
                    consider(ray_box(&origin, &dir, &b.bounds), Surface::Static(i));
                }
                for (i, b) in movers.iter().enumerate() {
                    consider(ray_box(&origin, &dir, b), Surface::Mover(i));
                }
                hits.push(best.map(|h| (h, origin + dir * h.t)));
            }
        }
        View {
            width: k.width,
            height: k.height,
            hits,
        }
    }

    fn shade(&self, hit: &Hit, point: &Vector3<f64>, frame: Option<usize>) -> Rgb<u8> {
        let (material, origin, surface_id) = match hit.surface {
            Surface::Room => (&self.room.as_ref().unwrap().1, Vector3::zeros(), 0u64),
            Surface::Static(i) => (&self.boxes[i].material, Vector3::zeros(), 1 + i as u64),
            Surface::Mover(i) => {
                let b = self.movers[i].bounds_at(frame.unwrap_or(0));
                (&self.movers[i].material, b.min, 1000 + i as u64)
            }
        };
        let face = (hit.axis as u64) * 2 + u64::from(hit.sign > 0.0);
        let local = point - origin;
        let (ua, va) = ((hit.axis + 1) % 3, (hit.axis + 2) % 3);
        let (s, t) = (local[ua] / material.cell, local[va] / material.cell);
        let sid = surface_id * 8 + face;
        let n = 0.65 * value_noise(self.seed, sid, s, t)
            + 0.35 * value_noise(self.seed, sid + 7919, 2.3 * s + 0.5, 2.3 * t + 0.5);
        let shading = 0.9 + 0.1 * (LIGHT[hit.axis] * hit.sign).abs();
        let amp = material.texture;
        let mut px = [0u8; 3];
        for (c, out) in px.iter_mut().enumerate() {
            let v = material.color[c] * (1.0 - amp * (1.0 - n)) * shading;
            *out = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
        Rgb(px)
    }

    fn render_view(&self, view: &View, frame: Option<usize>) -> (RgbImage, DepthMap) {
        let mut rgb = RgbImage::new(view.width as u32, view.height as u32);
        let mut depth = DepthMap::filled(view.width, view.height, 0.0);
        for (i, h) in view.hits.iter().enumerate() {
            let (x, y) = (i % view.width, i / view.width);
            if let Some((hit, p)) = h {
                rgb.put_pixel(x as u32, y as u32, self.shade(hit, p, frame));
                depth.set(x, y, hit.t);
            }
        }
        (rgb, depth)
    }

    fn analytic_flow(&self, view: &View, from: usize, to: usize, pose_to: &CameraPose) -> FlowField {
        let k = &self.intrinsics;
        let mut flow = FlowField::new(
            view.width,
            view.height,
            vec![0.0; view.hits.len()],
            vec![0.0; view.hits.len()],
            vec![false; view.hits.len()],
        );
        for (i, h) in view.hits.iter().enumerate() {
            let (x, y) = (i % view.width, i / view.width);
            let Some((hit, p)) = h else { continue };
            let moved = match hit.surface {
                Surface::Mover(m) => {
                    let mv = &self.movers[m];
                    p + (mv.center_at(to as f64) - mv.center_at(from as f64))
                }
                _ => *p,
            };
            if let Ok(proj) = project(&pose_to.transform_point(&moved), k) {
                let (u, v) = (x as f64 + 0.5, y as f64 + 0.5);
                flow.set(x, y, (proj.u - u) as f32, (proj.v - v) as f32, true);
            }
        }
        flow
    }

    fn mask_where(&self, view: &View, pred: impl Fn(usize) -> bool) -> BinaryMask {
        let data = view
            .hits
            .iter()
            .map(|h| matches!(h, Some((Hit { surface: Surface::Mover(m), .. }, _)) if pred(*m)))
            .collect();
        BinaryMask::from_vec(view.width, view.height, data)
    }
}

/// Renders the full sequence with ground truth.
pub fn generate(spec: &SceneSpec, exec: Execution) -> Result<SynthOutput, SynthError> {
    spec.validate()?;
    let poses = spec.poses()?;
    let n = spec.frames;
    let per_frame = map_range(exec, n, |f| {
        let view = spec.cast(&poses[f], Some(f));
        let (rgb, depth) = spec.render_view(&view, Some(f));
        let flow = (f + 1 < n).then(|| spec.analytic_flow(&view, f, f + 1, &poses[f + 1]));
        let backward_flow = (f > 0).then(|| spec.analytic_flow(&view, f, f - 1, &poses[f - 1]));
        let object = spec.mask_where(&view, |m| spec.movers[m].ever_moves());
        let instant = spec.mask_where(&view, |m| spec.movers[m].moving_at(f, n));
        (
            Frame {
                rgb,
                depth,
                flow,
                backward_flow,
                mask: Some(object.clone()),
            },
            object,
            instant,
        )
    });
    let mut frames = Vec::with_capacity(n);
    let mut object_masks = Vec::with_capacity(n);
    let mut instant_masks = Vec::with_capacity(n);
    for (fr, o, i) in per_frame {
        frames.push(fr);
        object_masks.push(o);
        instant_masks.push(i);
    }
    Ok(SynthOutput {
        sequence: Sequence {
            intrinsics: spec.intrinsics,
            depth_scale: spec.depth_scale,
            poses,
            frames,
        },
        object_masks,
        instant_masks,
    })
}

/// Ray-cast render of the static geometry only (dynamic objects removed).
pub fn render_static_gt(spec: &SceneSpec, pose: &CameraPose) -> Result<(RgbImage, DepthMap), SynthError> {
    spec.validate()?;
    if !pose.rotation().iter().chain(pose.translation().iter()).all(|v| v.is_finite()) {
        return Err(SynthError::InvalidSpec("non-finite pose".into()));
    }
    let view = spec.cast(pose, None);
    Ok(spec.render_view(&view, None))
}
