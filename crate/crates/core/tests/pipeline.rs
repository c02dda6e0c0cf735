//! Cross-module invariants on the synthetic fixtures.

use scenemem::dynamic_mask::{compute_masks, MaskConfig, Provenance};
use scenemem::scene_memory::{fuse_static, FusionConfig};
use scenemem::spatial_prompt::{assemble_conditioning, render_prompts, PromptConfig};
use scenemem::synth::{generate, two_objects};
use scenemem::Execution;

#[test]
fn stages_agree_across_execution_modes() {
    let spec = two_objects();
    let out = generate(&spec, Execution::Parallel).unwrap();
    assert_eq!(generate(&spec, Execution::Sequential).unwrap().sequence, out.sequence);

    let run = |exec: Execution| {
        let masks = compute_masks(&out.sequence, &MaskConfig { exec, ..MaskConfig::default() }).unwrap();
        let obj: Vec<_> = masks.object_masks.iter().map(|m| m.mask.clone()).collect();
        let memory = fuse_static(&out.sequence, Some(&obj), &FusionConfig { exec, ..FusionConfig::default() }).unwrap();
        let targets: Vec<_> = (0..6).map(|i| spec.camera_pose_at(i as f64 * 4.7 + 0.3).unwrap()).collect();
        let prompts = render_prompts(&memory, &targets, &memory.intrinsics, &PromptConfig { exec, ..PromptConfig::default() }).unwrap();
        (masks, memory, prompts)
    };
    let (ma, mema, pa) = run(Execution::Parallel);
    let (mb, memb, pb) = run(Execution::Sequential);
    assert_eq!(ma, mb);
    assert_eq!(mema, memb);
    assert_eq!(pa, pb);
}

#[test]
fn fused_points_never_come_from_dynamic_pixels() {
    let spec = two_objects();
    let out = generate(&spec, Execution::Parallel).unwrap();
    let masks = compute_masks(&out.sequence, &MaskConfig::default()).unwrap();
    for (pixel, object) in masks.pixel_masks.iter().zip(&masks.object_masks) {
        assert!(pixel.open3().is_subset_of(&object.mask));
        assert_eq!(object.provenance, Provenance::Computed);
    }
    let obj: Vec<_> = masks.object_masks.iter().map(|m| m.mask.clone()).collect();
    let memory = fuse_static(&out.sequence, Some(&obj), &FusionConfig::default()).unwrap();
    let w = memory.intrinsics.width;
    for (f, pts) in memory.frames.iter().enumerate() {
        for p in pts {
            assert_eq!(p.frame_id as usize, f);
            let px = p.pixel as usize;
            assert!(!obj[f].get(px % w, px / w), "frame {f} pixel {px} is dynamic");
        }
    }
}

#[test]
fn bundle_takes_the_last_frames_in_order() {
    let spec = two_objects();
    let out = generate(&spec, Execution::Parallel).unwrap();
    let memory = fuse_static(&out.sequence, Some(&out.object_masks), &FusionConfig::default()).unwrap();
    let targets = vec![spec.camera_pose_at(3.3).unwrap(); 3];
    let bundle = assemble_conditioning(&out.sequence, &memory, &targets, 9, &PromptConfig::default()).unwrap();
    let sources: Vec<usize> = bundle.temporal.iter().map(|(i, _)| *i).collect();
    assert_eq!(sources, (21..30).collect::<Vec<_>>());
    assert_eq!(bundle.temporal[8].1, out.sequence.frames[29].rgb);
    assert_eq!(bundle.len(), 12);
    assert!(assemble_conditioning(&out.sequence, &memory, &targets, 31, &PromptConfig::default()).is_err());
}
