//! Scene description for the synthetic generator and its text format.
//!
//! ```text
//! scenemem-scene 1
//! resolution 128 96
//! intrinsics 100 100 64 48
//! frames 30
//! seed 7
//! depth_scale 0.001
//! room -3 0 -3 3 2.5 4 color 0.8 0.75 0.7 texture 0.45 cell 0.35
//! box 1.5 0 2 2.5 1.2 3 color 0.3 0.5 0.7 texture 0.4
//! mover 0.8 0.8 0.2 color 0.9 0.15 0.1
//! key 0 -1.2 1.0 1.5
//! key 29 1.2 1.0 1.5
//! camera 0 -0.5 1.2 -2 0 1.1 4
//! camera 29 0.5 1.2 -2 0 1.1 4
//! ```
//!
//! World y points up. `room` is an axis-aligned shell seen from inside,
//! `box` a static axis-aligned box, `mover` a box of the given size whose
//! center follows the piecewise-linear `key` lines that follow it (clamped
//! outside the key range; the first key's frame is the object's start
//! frame). `camera` lines give eye and look-at target at key frames,
//! linearly interpolated. Optional attributes: `color r g b` (0..1),
//! `texture a` (value-noise amplitude, 0 = flat), `cell c` (noise cell size
//! in meters).

use std::fmt::Write as _;

use nalgebra::Vector3;

use super::SynthError;
use crate::geometry::{CameraIntrinsics, CameraPose};

pub const SCENE_HEADER: &str = "scenemem-scene 1";
/// All geometry must lie closer than this to every camera.
pub const FAR_PLANE: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub color: [f64; 3],
    pub texture: f64,
    pub cell: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            color: [0.7, 0.7, 0.7],
            texture: 0.4,
            cell: 0.35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    pub fn centered(center: Vector3<f64>, size: Vector3<f64>) -> Self {
        Self::new(center - size / 2.0, center + size / 2.0)
    }

    pub fn contains(&self, p: &Vector3<f64>, margin: f64) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] - margin && p[a] <= self.max[a] + margin)
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|a| self.min[a].is_finite() && self.max[a].is_finite() && self.min[a] < self.max[a])
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vector3::new(a.x, a.y, a.z),
            Vector3::new(b.x, a.y, a.z),
            Vector3::new(a.x, b.y, a.z),
            Vector3::new(b.x, b.y, a.z),
            Vector3::new(a.x, a.y, b.z),
            Vector3::new(b.x, a.y, b.z),
            Vector3::new(a.x, b.y, b.z),
            Vector3::new(b.x, b.y, b.z),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticBox {
    pub bounds: Aabb,
    pub material: Material,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mover {
    pub size: Vector3<f64>,
    pub material: Material,
    /// `(frame, center)` keys, strictly increasing in frame.
    pub keys: Vec<(usize, Vector3<f64>)>,
}

impl Mover {
    pub fn start_frame(&self) -> usize {
        self.keys.first().map_or(0, |k| k.0)
    }

    pub fn center_at(&self, frame: f64) -> Vector3<f64> {
        interpolate(&self.keys, frame)
    }

    pub fn bounds_at(&self, frame: usize) -> Aabb {
        Aabb::centered(self.center_at(frame as f64), self.size)
    }

    /// True if the object is displaced between `frame` and either neighbour.
    pub fn moving_at(&self, frame: usize, frame_count: usize) -> bool {
        let c = self.center_at(frame as f64);
        let prev = frame.checked_sub(1).map(|f| self.center_at(f as f64));
        let next = (frame + 1 < frame_count).then(|| self.center_at((frame + 1) as f64));
        prev.into_iter().chain(next).any(|p| p != c)
    }

    /// True if the object is displaced at any point of the sequence.
    pub fn ever_moves(&self) -> bool {
        self.keys.windows(2).any(|w| w[0].1 != w[1].1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraKey {
    pub frame: usize,
    pub eye: Vector3<f64>,
    pub target: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub intrinsics: CameraIntrinsics,
    pub frames: usize,
    pub seed: u64,
    pub depth_scale: f64,
    pub room: Option<(Aabb, Material)>,
    pub boxes: Vec<StaticBox>,
    pub movers: Vec<Mover>,
    pub cameras: Vec<CameraKey>,
}

fn interpolate(keys: &[(usize, Vector3<f64>)], frame: f64) -> Vector3<f64> {
    let Some(first) = keys.first() else {
        return Vector3::zeros();
    };
    if frame <= first.0 as f64 {
        return first.1;
    }
    for w in keys.windows(2) {
        let (f0, f1) = (w[0].0 as f64, w[1].0 as f64);
        if frame <= f1 {
            let t = (frame - f0) / (f1 - f0);
            return w[0].1 + (w[1].1 - w[0].1) * t;
        }
    }
    keys.last().unwrap().1
}

pub(crate) const WORLD_UP: Vector3<f64> = Vector3::new(0.0, 1.0, 0.0);

impl SceneSpec {
    pub fn camera_pose(&self, frame: usize) -> Result<CameraPose, SynthError> {
        self.camera_pose_at(frame as f64)
    }

    /// Camera at a fractional time along the keyed path; used for held-out
    /// views between input frames.
    pub fn camera_pose_at(&self, time: f64) -> Result<CameraPose, SynthError> {
        let eyes: Vec<_> = self.cameras.iter().map(|c| (c.frame, c.eye)).collect();
        let targets: Vec<_> = self.cameras.iter().map(|c| (c.frame, c.target)).collect();
        let eye = interpolate(&eyes, time);
        let target = interpolate(&targets, time);
        CameraPose::look_at(eye, target, WORLD_UP)
            .map_err(|e| SynthError::InvalidSpec(format!("camera at time {time}: {e}")))
    }

    pub fn poses(&self) -> Result<Vec<CameraPose>, SynthError> {
        (0..self.frames).map(|f| self.camera_pose(f)).collect()
    }

    /// Every dynamic-object box over the whole sequence.
    pub fn dynamic_volumes(&self) -> Vec<Aabb> {
        self.movers
            .iter()
            .filter(|m| m.ever_moves())
            .flat_map(|m| (0..self.frames).map(move |f| m.bounds_at(f)))
            .collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        self.intrinsics
            .validate()
            .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        if self.frames < 2 {
            return bad(format!("need at least 2 frames, got {}", self.frames));
        }
        if !(self.depth_scale.is_finite() && self.depth_scale > 0.0) {
            return bad("depth_scale must be positive".into());
        }
        if self.cameras.is_empty() {
            return bad("no camera keys".into());
        }
        if self.cameras.windows(2).any(|w| w[0].frame >= w[1].frame) {
            return bad("camera keys must have increasing frames".into());
        }
        let materials = self
            .room
            .iter()
            .map(|r| &r.1)
            .chain(self.boxes.iter().map(|b| &b.material))
            .chain(self.movers.iter().map(|m| &m.material));
        for m in materials {
            if !m.color.iter().all(|c| (0.0..=1.0).contains(c))
                || !(0.0..=1.0).contains(&m.texture)
                || !(m.cell > 0.0 && m.cell.is_finite())
            {
                return bad(format!("invalid material {m:?}"));
            }
        }
        let poses = self.poses()?;
        if let Some((room, _)) = &self.room {
            if !room.is_valid() {
                return bad("degenerate room".into());
            }
            for (f, p) in poses.iter().enumerate() {
                if !room.contains(&p.center(), -1e-6) {
                    return bad(format!("camera {f} outside room"));
                }
            }
        }
        for b in &self.boxes {
            if !b.bounds.is_valid() {
                return bad("degenerate static box".into());
            }
        }
        for (i, m) in self.movers.iter().enumerate() {
            if !(m.size.iter().all(|s| *s > 0.0 && s.is_finite())) || m.keys.is_empty() {
                return bad(format!("mover {i} needs a positive size and at least one key"));
            }
            if m.keys.windows(2).any(|w| w[0].0 >= w[1].0) {
                return bad(format!("mover {i} keys must have increasing frames"));
            }
            for (f, p) in poses.iter().enumerate() {
                if m.bounds_at(f).contains(&p.center(), 0.05) {
                    return bad(format!("mover {i} intersects the camera at frame {f}"));
                }
            }
        }
        let far = FAR_PLANE;
        let mut all_corners: Vec<Vector3<f64>> = Vec::new();
        if let Some((room, _)) = &self.room {
            all_corners.extend(room.corners());
        }
        for b in &self.boxes {
            all_corners.extend(b.bounds.corners());
        }
        for m in &self.movers {
            for f in 0..self.frames {
                all_corners.extend(m.bounds_at(f).corners());
            }
        }
        for p in &poses {
            if all_corners.iter().any(|c| (c - p.center()).norm() >= far) {
                return bad(format!("geometry beyond the {far} m far plane"));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, SynthError> {
        if !text.is_empty() && !text.ends_with('\n') {
            return Err(SynthError::parse(
                text.lines().count(),
                "line is not newline-terminated (file truncated?)",
            ));
        }
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, l)) if l == SCENE_HEADER => {}
            _ => return Err(SynthError::parse(1, format!("expected {SCENE_HEADER:?}"))),
        }
        let mut resolution = None;
        let mut k4 = None;
        let mut frames = None;
        let mut seed = 0u64;
        let mut depth_scale = 0.001;
        let mut room = None;
        let mut boxes = Vec::new();
        let mut movers: Vec<Mover> = Vec::new();
        let mut cameras = Vec::new();
        for (n, line) in lines {
            let tok: Vec<&str> = line.split_whitespace().collect();
            let nums = |s: &[&str]| -> Result<Vec<f64>, SynthError> {
                s.iter()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| SynthError::parse(n, format!("bad number {t:?}")))
                    })
                    .collect()
            };
            let int = |t: &str| -> Result<usize, SynthError> {
                t.parse()
                    .map_err(|_| SynthError::parse(n, format!("bad integer {t:?}")))
            };
            let (head, rest) = tok.split_first().expect("nonempty line");
            match (*head, rest.len()) {
                ("resolution", 2) => resolution = Some((int(rest[0])?, int(rest[1])?)),
                ("intrinsics", 4) => k4 = Some(nums(rest)?),
                ("frames", 1) => frames = Some(int(rest[0])?),
                ("seed", 1) => {
                    seed = rest[0]
                        .parse()
                        .map_err(|_| SynthError::parse(n, "bad seed"))?
                }
                ("depth_scale", 1) => depth_scale = nums(rest)?[0],
                ("room", c) if c >= 6 => {
                    let v = nums(&rest[..6])?;
                    let aabb = Aabb::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5]));
                    room = Some((aabb, parse_material(&rest[6..], n, Material::default())?));
                }
                ("box", c) if c >= 6 => {
                    let v = nums(&rest[..6])?;
                    boxes.push(StaticBox {
                        bounds: Aabb::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5])),
                        material: parse_material(&rest[6..], n, Material::default())?,
                    });
                }
                ("mover", c) if c >= 3 => {
                    let v = nums(&rest[..3])?;
                    let flat = Material {
                        texture: 0.0,
                        ..Material::default()
                    };
                    movers.push(Mover {
                        size: Vector3::new(v[0], v[1], v[2]),
                        material: parse_material(&rest[3..], n, flat)?,
                        keys: Vec::new(),
                    });
                }
                ("key", 4) => {
                    let m = movers
                        .last_mut()
                        .ok_or_else(|| SynthError::parse(n, "key before any mover"))?;
                    let v = nums(&rest[1..])?;
                    m.keys.push((int(rest[0])?, Vector3::new(v[0], v[1], v[2])));
                }
                ("camera", 7) => {
                    let v = nums(&rest[1..])?;
                    cameras.push(CameraKey {
                        frame: int(rest[0])?,
                        eye: Vector3::new(v[0], v[1], v[2]),
                        target: Vector3::new(v[3], v[4], v[5]),
                    });
                }
                _ => return Err(SynthError::parse(n, format!("unrecognized line {line:?}"))),
            }
        }
        let (w, h) = resolution.ok_or_else(|| SynthError::InvalidSpec("missing resolution".into()))?;
        let k = k4.ok_or_else(|| SynthError::InvalidSpec("missing intrinsics".into()))?;
        let intrinsics = CameraIntrinsics::new(k[0], k[1], k[2], k[3], w, h)
            .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        let spec = SceneSpec {
            intrinsics,
            frames: frames.ok_or_else(|| SynthError::InvalidSpec("missing frames".into()))?,
            seed,
            depth_scale,
            room,
            boxes,
            movers,
            cameras,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let k = &self.intrinsics;
        let mut s = String::new();
        let v3 = |v: &Vector3<f64>| format!("{} {} {}", v.x, v.y, v.z);
        let mat = |m: &Material| {
            format!(
                "color {} {} {} texture {} cell {}",
                m.color[0], m.color[1], m.color[2], m.texture, m.cell
            )
        };
        let _ = writeln!(s, "{SCENE_HEADER}");
        let _ = writeln!(s, "resolution {} {}", k.width, k.height);
        let _ = writeln!(s, "intrinsics {} {} {} {}", k.fx, k.fy, k.cx, k.cy);
        let _ = writeln!(s, "frames {}", self.frames);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "depth_scale {}", self.depth_scale);
        if let Some((r, m)) = &self.room {
            let _ = writeln!(s, "room {} {} {}", v3(&r.min), v3(&r.max), mat(m));
        }
        for b in &self.boxes {
            let _ = writeln!(s, "box {} {} {}", v3(&b.bounds.min), v3(&b.bounds.max), mat(&b.material));
        }
        for m in &self.movers {
            let _ = writeln!(s, "mover {} {}", v3(&m.size), mat(&m.material));
            for (f, c) in &m.keys {
                let _ = writeln!(s, "key {f} {}", v3(c));
            }
        }
        for c in &self.cameras {
            let _ = writeln!(s, "camera {} {} {}", c.frame, v3(&c.eye), v3(&c.target));
        }
        s
    }
}

fn parse_material(tok: &[&str], line: usize, mut m: Material) -> Result<Material, SynthError> {
    let num = |t: Option<&&str>| -> Result<f64, SynthError> {
        t.and_then(|t| t.parse().ok())
            .ok_or_else(|| SynthError::parse(line, "bad material value"))
    };
    let mut i = 0;
    while i < tok.len() {
        match tok[i] {
            "color" => {
                m.color = [num(tok.get(i + 1))?, num(tok.get(i + 2))?, num(tok.get(i + 3))?];
                i += 4;
            }
            "texture" => {
                m.texture = num(tok.get(i + 1))?;
                i += 2;
            }
            "cell" => {
                m.cell = num(tok.get(i + 1))?;
                i += 2;
            }
            other => return Err(SynthError::parse(line, format!("unknown attribute {other:?}"))),
        }
    }
    Ok(m)
}
