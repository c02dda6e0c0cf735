use nalgebra::Vector3;
use proptest::prelude::*;

use scenemem::io::{
    decode_depth, decode_flow, decode_mask, decode_pointcloud, decode_trajectory, encode_depth,
    encode_flow, encode_mask, encode_pointcloud, encode_trajectory, records_from_poses, CloudPoint,
    FormatError, PlyEncoding, SequenceManifest,
};
use scenemem::synth::{moving_box, SceneSpec};
use scenemem::{BinaryMask, CameraPose, DepthMap, FlowField};

fn pose_strategy() -> impl Strategy<Value = CameraPose> {
    (
        prop::array::uniform3(-1.0f64..1.0),
        0.0f64..3.1,
        prop::array::uniform3(-50.0f64..50.0),
    )
        .prop_filter("axis", |(a, _, _)| Vector3::from(*a).norm() > 1e-3)
        .prop_map(|(axis, angle, t)| CameraPose::from_axis_angle(Vector3::from(axis), angle, Vector3::from(t)))
}

fn flow_strategy() -> impl Strategy<Value = FlowField> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        (
            prop::collection::vec(-300.0f32..300.0, w * h),
            prop::collection::vec(-300.0f32..300.0, w * h),
            prop::collection::vec(any::<bool>(), w * h),
        )
            .prop_map(move |(du, dv, valid)| FlowField::new(w, h, du, dv, valid))
    })
}

fn points_strategy() -> impl Strategy<Value = Vec<CloudPoint>> {
    prop::collection::vec(
        (
            prop::array::uniform3(-1e3f64..1e3),
            prop::array::uniform3(any::<u8>()),
            0u32..1000,
            any::<u32>(),
        )
            .prop_map(|(position, color, frame_id, pixel)| CloudPoint {
                position,
                color,
                frame_id,
                pixel,
            }),
        0..40,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectory_text_round_trips(poses in prop::collection::vec(pose_strategy(), 1..10)) {
        let text = encode_trajectory(&records_from_poses(&poses));
        let back = decode_trajectory(&text).unwrap();
        prop_assert_eq!(encode_trajectory(&back), text);
        for (r, p) in back.iter().zip(&poses) {
            prop_assert!(r.pose().max_abs_diff(p) < 1e-9);
        }
    }

    #[test]
    fn flow_round_trips(flow in flow_strategy()) {
        let bytes = encode_flow(&flow);
        let back = decode_flow(&bytes).unwrap();
        prop_assert_eq!(back.valid(), flow.valid());
        prop_assert_eq!(encode_flow(&back), bytes);
    }

    #[test]
    fn ply_round_trips(points in points_strategy(), ascii in any::<bool>()) {
        let enc = if ascii { PlyEncoding::Ascii } else { PlyEncoding::BinaryLittleEndian };
        let bytes = encode_pointcloud(&points, enc);
        let back = decode_pointcloud(&bytes).unwrap();
        prop_assert_eq!(&back, &points);
        prop_assert_eq!(encode_pointcloud(&back, enc), bytes);
    }

    #[test]
    fn mask_round_trips(w in 1usize..20, h in 1usize..20, bits in prop::collection::vec(any::<bool>(), 400)) {
        let mask = BinaryMask::from_vec(w, h, bits[..w * h].to_vec());
        let bytes = encode_mask(&mask);
        prop_assert_eq!(decode_mask(&bytes).unwrap(), mask);
    }

    #[test]
    fn depth_round_trips(raw in prop::collection::vec(0u16..u16::MAX, 48)) {
        let scale = 1.0 / 5000.0;
        let depth = DepthMap::new(8, 6, raw.iter().map(|&r| r as f64 * scale).collect());
        let bytes = encode_depth(&depth, scale).unwrap();
        let back = decode_depth(&bytes, scale).unwrap();
        prop_assert_eq!(&back, &depth);
        prop_assert_eq!(encode_depth(&back, scale).unwrap(), bytes);
    }

    #[test]
    fn truncated_binary_files_are_rejected(points in points_strategy(), flow in flow_strategy(), cut in 0.0f64..1.0) {
        let ply = encode_pointcloud(&points, PlyEncoding::BinaryLittleEndian);
        let at = ((ply.len() as f64 * cut) as usize).min(ply.len() - 1);
        if !points.is_empty() {
            prop_assert!(decode_pointcloud(&ply[..at]).is_err());
        }
        let flo = encode_flow(&flow);
        let at = ((flo.len() as f64 * cut) as usize).min(flo.len() - 1);
        prop_assert!(decode_flow(&flo[..at]).is_err());
    }
}

#[test]
fn scene_spec_and_manifest_round_trip() {
    let spec = moving_box(2);
    let text = spec.to_text();
    assert_eq!(SceneSpec::parse(&text).unwrap(), spec);
    assert_eq!(SceneSpec::parse(&text).unwrap().to_text(), text);

    let dir = tempfile::tempdir().unwrap();
    let out = scenemem::synth::generate(&spec, scenemem::Execution::Sequential).unwrap();
    let manifest = out.sequence.write(dir.path(), scenemem::Execution::Sequential).unwrap();
    let loaded = SequenceManifest::load(&dir.path().join("manifest")).unwrap();
    assert_eq!(loaded.to_text(), manifest.to_text());
}

#[test]
fn unterminated_last_line_is_reported() {
    let text = encode_trajectory(&records_from_poses(&[CameraPose::identity(); 2]));
    let cut = &text[..text.len() - 1];
    assert!(matches!(decode_trajectory(cut), Err(FormatError::UnterminatedLine { line: 2 })));
}
