//! Ready-made scenes used by the tests, benches and the `synth --preset`
//! flag. All are 128×96, 30 frames, inside the same textured room.

use nalgebra::Vector3;

use super::spec::{Aabb, CameraKey, Material, Mover, SceneSpec, StaticBox};
use crate::geometry::CameraIntrinsics;

const FRAMES: usize = 30;

fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(x, y, z)
}

fn base(seed: u64) -> SceneSpec {
    SceneSpec {
        intrinsics: CameraIntrinsics::new(100.0, 100.0, 64.0, 48.0, 128, 96).expect("valid intrinsics"),
        frames: FRAMES,
        seed,
        depth_scale: 0.001,
        room: Some((
            Aabb::new(v(-3.0, 0.0, -3.0), v(3.0, 2.6, 4.5)),
            Material {
                color: [0.82, 0.76, 0.68],
                texture: 0.45,
                cell: 0.35,
            },
        )),
        boxes: vec![StaticBox {
            bounds: Aabb::new(v(1.4, 0.0, 2.6), v(2.3, 1.1, 3.4)),
            material: Material {
                color: [0.35, 0.62, 0.42],
                texture: 0.4,
                cell: 0.25,
            },
        }],
        movers: Vec::new(),
        cameras: Vec::new(),
    }
}

fn red() -> Material {
    Material {
        color: [0.9, 0.16, 0.12],
        texture: 0.0,
        cell: 1.0,
    }
}

fn blue() -> Material {
    Material {
        color: [0.12, 0.22, 0.88],
        texture: 0.0,
        cell: 1.0,
    }
}

fn cam(frame: usize, eye: Vector3<f64>, target: Vector3<f64>) -> CameraKey {
    CameraKey { frame, eye, target }
}

/// Camera paths shared by the presets, indexed by `variant % 5`.
fn camera_path(variant: u64) -> Vec<CameraKey> {
    let last = FRAMES - 1;
    match variant % 5 {
        // Lateral dolly.
        0 => vec![
            cam(0, v(-0.6, 1.3, -2.0), v(-0.2, 1.1, 4.0)),
            cam(last, v(0.6, 1.3, -2.0), v(0.2, 1.1, 4.0)),
        ],
        // Forward push with slight pan.
        1 => vec![
            cam(0, v(0.0, 1.2, -2.4), v(-0.3, 1.1, 4.0)),
            cam(last, v(0.1, 1.25, -1.2), v(0.3, 1.0, 4.0)),
        ],
        // Pan in place.
        2 => vec![
            cam(0, v(0.0, 1.3, -2.0), v(-1.2, 1.1, 4.0)),
            cam(last, v(0.0, 1.3, -2.0), v(1.2, 1.1, 4.0)),
        ],
        // Arc: move and counter-rotate.
        3 => vec![
            cam(0, v(-0.8, 1.4, -1.8), v(0.4, 1.0, 4.0)),
            cam(15, v(0.0, 1.2, -2.2), v(0.0, 1.1, 4.0)),
            cam(last, v(0.8, 1.4, -1.8), v(-0.4, 1.0, 4.0)),
        ],
        // Rise and tilt.
        _ => vec![
            cam(0, v(0.2, 0.9, -2.2), v(0.0, 1.3, 4.0)),
            cam(last, v(-0.2, 1.7, -2.0), v(0.0, 0.7, 4.0)),
        ],
    }
}

/// Static room; `variant` selects the camera path and texture seed.
pub fn static_room(variant: u64) -> SceneSpec {
    let mut s = base(100 + variant);
    s.cameras = camera_path(variant);
    s
}

/// One flat-colored panel sliding left and back while the camera moves.
pub fn moving_box(variant: u64) -> SceneSpec {
    let mut s = base(200 + variant);
    s.cameras = camera_path(variant);
    s.movers.push(Mover {
        size: v(1.0, 1.0, 0.3),
        material: red(),
        keys: vec![(0, v(-1.5, 1.1, 1.0)), (14, v(0.2, 1.1, 1.0)), (29, v(-1.4, 1.2, 1.0))],
    });
    s
}

/// An object that stays put for the first frames and then starts moving.
pub fn late_mover() -> SceneSpec {
    let mut s = base(300);
    s.cameras = camera_path(0);
    s.movers.push(Mover {
        size: v(1.0, 1.0, 0.3),
        material: red(),
        keys: vec![(12, v(-1.2, 1.1, 1.2)), (29, v(0.8, 1.1, 1.2))],
    });
    s
}

/// Two objects moving in different directions.
pub fn two_objects() -> SceneSpec {
    let mut s = base(400);
    s.cameras = camera_path(3);
    s.movers.push(Mover {
        size: v(0.9, 0.9, 0.3),
        material: red(),
        keys: vec![(0, v(-1.7, 1.0, 1.3)), (29, v(-0.2, 1.0, 1.3))],
    });
    s.movers.push(Mover {
        size: v(0.8, 0.8, 0.3),
        material: blue(),
        keys: vec![(0, v(1.0, 0.6, 0.9)), (15, v(1.0, 1.7, 0.9)), (29, v(0.9, 0.7, 0.9))],
    });
    s
}

/// Five static scenes with distinct camera paths.
pub fn static_suite() -> Vec<SceneSpec> {
    (0..5).map(static_room).collect()
}

/// Five dynamic scenes, including a late mover and a two-object scene.
pub fn dynamic_suite() -> Vec<SceneSpec> {
    vec![moving_box(0), moving_box(1), moving_box(2), late_mover(), two_objects()]
}
