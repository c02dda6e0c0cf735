use std::path::Path;
use std::process::{Command, Output};

use scenemem::io::{read_mask, read_trajectory, SequenceManifest};
use scenemem::spatial_prompt::{read_bundle_index, BUNDLE_INDEX};
use scenemem::synth::static_room;

fn scenemem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenemem"))
        .args(args)
        .env_remove("SCENEMEM_THREADS")
        .output()
        .expect("spawn scenemem")
}

fn ok(args: &[&str]) -> String {
    let out = scenemem(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let last = stdout.lines().last().unwrap_or_default().to_string();
    assert!(last.starts_with("scenemem ") && last.contains(" ok"), "summary line: {last}");
    last
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn field(summary: &str, key: &str) -> usize {
    summary
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {summary}"))
        .parse()
        .unwrap()
}

#[test]
fn spec_file_to_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("room.scene");
    std::fs::write(&scene, static_room(1).to_text()).unwrap();
    let seq = dir.path().join("seq");
    let s = ok(&["synth", "--spec", p(&scene), "--targets", "12", "--out", p(&seq)]);
    assert_eq!(field(&s, "frames"), 30);
    let run = dir.path().join("run");
    let s = ok(&[
        "pipeline",
        "--manifest",
        p(&seq.join("manifest")),
        "--targets",
        p(&seq.join("revisit.traj")),
        "--out",
        p(&run),
    ]);
    assert_eq!(field(&s, "bundle_frames"), 9 + 12);
    let index = read_bundle_index(&run.join("bundle").join(BUNDLE_INDEX)).unwrap();
    assert_eq!((index.temporal_window, index.spatial_count), (9, 12));
    // A static scene yields empty masks.
    assert!(read_mask(&run.join("masks/0000.png")).unwrap().is_empty());
    assert!(run.join("memory/points.ply").is_file());
}

#[test]
fn stages_compose_with_imported_masks() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    ok(&["synth", "--preset", "late_mover", "--targets", "5", "--out", p(&seq)]);
    let manifest = seq.join("manifest");
    let targets = seq.join("revisit.traj");
    let masks = dir.path().join("masks");
    let s = ok(&["mask", "--manifest", p(&manifest), "--out", p(&masks)]);
    assert!(field(&s, "dynamic_pixels") > 0);
    assert!(!read_mask(&masks.join("0000.png")).unwrap().is_empty());

    let mem = dir.path().join("mem");
    let s = ok(&["fuse", "--manifest", p(&manifest), "--masks", p(&masks), "--out", p(&mem)]);
    assert!(s.contains("masked=true"));
    let gt_mem = dir.path().join("gt_mem");
    ok(&["fuse", "--manifest", p(&manifest), "--manifest-masks", "--out", p(&gt_mem)]);

    let retr = dir.path().join("retr");
    ok(&["retrieve", "--memory", p(&mem), "--targets", p(&targets), "-n", "4", "--out", p(&retr)]);
    let text = std::fs::read_to_string(retr.join("retrieval.txt")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().all(|l| l.split("frames=").nth(1).unwrap().split(' ').next().unwrap().split(',').count() == 4));

    let render = dir.path().join("render");
    let s = ok(&["render", "--memory", p(&mem), "--targets", p(&targets), "--out", p(&render)]);
    assert_eq!(field(&s, "targets"), 5);
    assert!(render.join("rgb/0004.png").is_file() && render.join("valid/0004.png").is_file());

    let bundle = dir.path().join("bundle");
    let s = ok(&[
        "bundle", "--manifest", p(&manifest), "--memory", p(&mem), "--targets", p(&targets), "-w", "5",
        "--out", p(&bundle),
    ]);
    assert_eq!(field(&s, "frames"), 10);
}

#[test]
fn eval_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    ok(&["synth", "--preset", "moving_box:0", "--targets", "4", "--out", p(&seq)]);
    let traj = seq.join("trajectory.txt");
    assert_eq!(read_trajectory(&traj).unwrap().len(), 30);
    let out = dir.path().join("eval");
    let s = ok(&[
        "eval", "--estimated", p(&traj), "--reference", p(&traj), "--generated", p(&seq.join("rgb")),
        "--reference-manifest", p(&seq.join("manifest")), "--static-only", "--out", p(&out),
    ]);
    assert!(s.contains("mRotErr=0.000000"), "{s}");
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("mask_mode static-only"));
    assert!(report.contains("PSNR_inf_excluded 30"));
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    for sub in ["synth", "mask", "fuse", "retrieve", "render", "bundle", "eval", "pipeline"] {
        let out = scenemem(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
}

#[test]
fn bad_input_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    ok(&["synth", "--preset", "static_room", "--targets", "3", "--out", p(&seq)]);
    let manifest = seq.join("manifest");
    let targets = seq.join("revisit.traj");
    let out = dir.path().join("out");

    let code = |args: &[&str]| scenemem(args).status.code();
    assert_eq!(code(&["pipeline", "--manifest", p(&manifest), "--targets", p(&targets), "--unknown", "--out", p(&out)]), Some(1));
    assert_eq!(code(&["pipeline", "--manifest", p(&manifest), "--targets", p(&targets), "-w", "0", "--out", p(&out)]), Some(1));
    assert_eq!(code(&["pipeline", "--manifest", p(&manifest), "--targets", p(&targets), "-w", "31", "--out", p(&out)]), Some(1));
    assert_eq!(code(&["pipeline", "--manifest", p(&manifest), "--targets", p(&targets), "--tau", "0", "--out", p(&out)]), Some(1));
    assert_eq!(code(&["fuse", "--manifest", p(&manifest), "--out", p(&out)]), Some(1));
    assert_eq!(code(&["pipeline", "--manifest", p(&manifest), "--targets", p(&dir.path().join("missing")), "--out", p(&out)]), Some(2));

    // A frame file that went missing after the manifest was written.
    let m = SequenceManifest::load(&manifest).unwrap();
    std::fs::remove_file(seq.join(&m.frames[7].rgb)).unwrap();
    assert_eq!(code(&["pipeline", "--manifest", p(&manifest), "--targets", p(&targets), "--out", p(&out)]), Some(2));

    // A corrupt trajectory is a validation error.
    let bad = dir.path().join("bad.traj");
    std::fs::write(&bad, "0 1 2 3\n").unwrap();
    assert_eq!(code(&["eval", "--estimated", p(&bad), "--reference", p(&targets), "--out", p(&out)]), Some(1));
    assert!(!out.exists());
}

#[test]
fn thread_settings_do_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    ok(&["synth", "--preset", "moving_box:2", "--targets", "6", "--out", p(&seq)]);
    let (manifest, targets) = (seq.join("manifest"), seq.join("revisit.traj"));
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["pipeline", "--manifest", p(&manifest), "--targets", p(&targets)];
        args.extend_from_slice(extra);
        let o = out.to_str().unwrap().to_string();
        args.extend_from_slice(&["--out", &o]);
        ok(&args);
        out
    };
    let a = run("a", &[]);
    let b = run("b", &["--sequential"]);
    let c = run("c", &["--threads", "2"]);
    for rel in ["memory/points.ply", "masks/0010.png", "bundle/spatial/0003.png", "bundle/bundle.index"] {
        let x = std::fs::read(a.join(rel)).unwrap();
        assert_eq!(x, std::fs::read(b.join(rel)).unwrap(), "{rel}");
        assert_eq!(x, std::fs::read(c.join(rel)).unwrap(), "{rel}");
    }
}
