//! `scenemem` command line: every pipeline stage as a subcommand plus a
//! `pipeline` command that chains mask, fuse, render and bundle.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 I/O error. Each
//! command prints one `scenemem <command> ok key=value ...` line on stdout.
//! All inputs are loaded and checked before the first output file is
//! written.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dynamic_mask::{compute_masks, import_mask_dir, import_masks, MaskConfig, MaskError};
use crate::eval::{
    ate, camera_errors, image_metrics, pair_by_nearest_pose, report_text, revisit_consistency,
    EvalError, ImageF64,
};
use crate::geometry::CameraPose;
use crate::io::{
    read_rgb, read_text, read_trajectory, records_from_poses, write_bytes, write_mask, write_rgb,
    write_trajectory, FormatError, Sequence, SequenceManifest,
};
use crate::par::{init_threads, Execution};
use crate::raster::BinaryMask;
use crate::scene_memory::{fuse_static, load_memory, save_memory, FusionConfig, MemoryError, SceneMemory};
use crate::spatial_prompt::{
    assemble_conditioning, fov_overlap, render_prompts, select_shared_top_n, select_top_n,
    write_bundle, PromptConfig, PromptError,
};
use crate::synth::{self, SceneSpec, SynthError};

pub const THREADS_ENV: &str = "SCENEMEM_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<MaskError> for CliError {
    fn from(e: MaskError) -> Self {
        match e {
            MaskError::Format(f) => f.into(),
            other => invalid(other.to_string()),
        }
    }
}

impl From<MemoryError> for CliError {
    fn from(e: MemoryError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            invalid(e.to_string())
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            invalid(e.to_string())
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        invalid(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        invalid(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "scenemem", version, about = "Static-only scene memory and spatial prompts for dynamic RGB-D video")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = THREADS_ENV, default_value_t = 0)]
    threads: usize,
    /// Run every stage on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Progress messages on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic RGB-D sequence with analytic flow and masks.
    Synth(SynthArgs),
    /// Compute dynamic object masks for a sequence.
    Mask(MaskArgs),
    /// Fuse static pixels into a scene memory.
    Fuse(FuseArgs),
    /// List the top-n stored frames for each target pose.
    Retrieve(RetrieveArgs),
    /// Render spatial prompts at target poses.
    Render(RenderArgs),
    /// Assemble the temporal + spatial conditioning bundle.
    Bundle(BundleArgs),
    /// Camera and revisit-consistency metrics.
    Eval(EvalArgs),
    /// mask -> fuse -> render -> bundle in one go.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Scene description file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Built-in scene: static_room[:v], moving_box[:v], late_mover, two_objects.
    #[arg(long)]
    preset: Option<String>,
    /// Number of held-out target poses written to revisit.traj.
    #[arg(long, default_value_t = 40)]
    targets: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Clone)]
struct MaskParams {
    /// Flow residual threshold (px).
    #[arg(long, default_value_t = 2.0)]
    tau: f64,
    /// Points sampled per frame for backward tracking.
    #[arg(long = "samples", short = 'k', default_value_t = 64)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Region-growing colour threshold on [0, 1] intensities.
    #[arg(long, default_value_t = 30.0 / 255.0)]
    color_thresh: f64,
    /// Region-growing depth threshold (m).
    #[arg(long, default_value_t = 0.05)]
    depth_thresh: f64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

impl MaskParams {
    fn config(&self, exec: Execution) -> Result<MaskConfig, CliError> {
        let cfg = MaskConfig {
            tau: self.tau,
            samples: self.samples,
            seed: self.seed,
            color_thresh: self.color_thresh,
            depth_thresh: self.depth_thresh,
            stride: self.stride,
            exec,
            ..MaskConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Clone)]
struct FuseParams {
    /// Per-frame dedup voxel size (0 disables).
    #[arg(long, default_value_t = 0.0)]
    voxel: f64,
    /// Relative depth jump that marks an edge pixel.
    #[arg(long, default_value_t = 0.10, conflicts_with = "keep_edges")]
    edge_threshold: f64,
    /// Keep pixels on depth discontinuities.
    #[arg(long)]
    keep_edges: bool,
}

impl FuseParams {
    fn config(&self, exec: Execution) -> Result<FusionConfig, CliError> {
        if !(self.voxel >= 0.0 && self.voxel.is_finite()) {
            return Err(invalid(format!("--voxel must be a non-negative number, got {}", self.voxel)));
        }
        if !self.keep_edges && !(self.edge_threshold > 0.0 && self.edge_threshold.is_finite()) {
            return Err(invalid(format!(
                "--edge-threshold must be positive, got {}",
                self.edge_threshold
            )));
        }
        Ok(FusionConfig {
            voxel_size: self.voxel,
            edge_threshold: (!self.keep_edges).then_some(self.edge_threshold),
            exec,
        })
    }
}

#[derive(Debug, Args, Clone)]
struct PromptParams {
    /// Frames retrieved per target.
    #[arg(short = 'n', long = "topn", default_value_t = 7)]
    n: usize,
    /// Splat half-width (px).
    #[arg(long, default_value_t = 0)]
    radius: usize,
    /// Rank frames once over all targets.
    #[arg(long)]
    shared_topn: bool,
}

impl PromptParams {
    fn config(&self, exec: Execution) -> Result<PromptConfig, CliError> {
        let cfg = PromptConfig {
            n: self.n,
            radius: self.radius,
            shared_topn: self.shared_topn,
            exec,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct MaskArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    params: MaskParams,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FuseArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of `%04d.png` dynamic masks.
    #[arg(long, conflicts_with_all = ["manifest_masks", "no_masks"])]
    masks: Option<PathBuf>,
    /// Use the masks referenced by the manifest.
    #[arg(long, conflicts_with = "no_masks")]
    manifest_masks: bool,
    /// Treat every pixel as static.
    #[arg(long)]
    no_masks: bool,
    #[command(flatten)]
    params: FuseParams,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    #[arg(long)]
    memory: PathBuf,
    /// Target trajectory file.
    #[arg(long)]
    targets: PathBuf,
    #[arg(short = 'n', long = "topn", default_value_t = 7)]
    n: usize,
    #[arg(long)]
    shared_topn: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    memory: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    #[command(flatten)]
    params: PromptParams,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BundleArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    memory: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    /// Temporal window: trailing input frames kept.
    #[arg(short = 'w', long, default_value_t = 9)]
    window: usize,
    #[command(flatten)]
    params: PromptParams,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Estimated (or generated-view) camera trajectory.
    #[arg(long)]
    estimated: PathBuf,
    /// Reference camera trajectory.
    #[arg(long)]
    reference: PathBuf,
    /// Similarity-align the estimate before measuring.
    #[arg(long)]
    align: bool,
    /// Directory of generated `%04d.png` frames, one per estimated pose.
    #[arg(long, requires = "reference_manifest")]
    generated: Option<PathBuf>,
    /// Sequence whose frames are the revisit references.
    #[arg(long, requires = "generated")]
    reference_manifest: Option<PathBuf>,
    /// Evaluate only pixels the reference masks mark static.
    #[arg(long, requires = "generated")]
    static_only: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    #[arg(short = 'w', long, default_value_t = 9)]
    window: usize,
    #[command(flatten)]
    mask: MaskParams,
    #[command(flatten)]
    fuse: FuseParams,
    #[command(flatten)]
    prompt: PromptParams,
    #[arg(long)]
    out: PathBuf,
}

struct Ctx {
    exec: Execution,
    verbose: bool,
}

impl Ctx {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("scenemem: {}", msg.as_ref());
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Messages go to stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("scenemem: error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<String, CliError> {
    if cli.threads > 0 {
        init_threads(cli.threads);
    }
    let ctx = Ctx {
        exec: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::Mask(a) => cmd_mask(&ctx, a),
        Command::Fuse(a) => cmd_fuse(&ctx, a),
        Command::Retrieve(a) => cmd_retrieve(&ctx, a),
        Command::Render(a) => cmd_render(&ctx, a),
        Command::Bundle(a) => cmd_bundle(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Pipeline(a) => cmd_pipeline(&ctx, a),
    }
}

fn preset(name: &str) -> Result<SceneSpec, CliError> {
    let (base, variant) = match name.split_once(':') {
        Some((b, v)) => (
            b,
            Some(v.parse::<u64>().map_err(|_| invalid(format!("bad preset variant '{v}'")))?),
        ),
        None => (name, None),
    };
    let spec = match (base, variant) {
        ("static_room", v) => synth::static_room(v.unwrap_or(0)),
        ("moving_box", v) => synth::moving_box(v.unwrap_or(0)),
        ("late_mover", None) => synth::late_mover(),
        ("two_objects", None) => synth::two_objects(),
        _ => {
            return Err(invalid(format!(
                "unknown preset '{name}' (expected static_room[:v], moving_box[:v], late_mover or two_objects)"
            )))
        }
    };
    Ok(spec)
}

/// Poses between the keyframes, offset from the input frame times.
fn revisit_poses(spec: &SceneSpec, count: usize) -> Result<Vec<CameraPose>, CliError> {
    let last = spec.frames.saturating_sub(1) as f64;
    (0..count)
        .map(|i| {
            let t = (i as f64 + 0.5) * last / count as f64;
            Ok(spec.camera_pose_at(t)?)
        })
        .collect()
}

fn cmd_synth(ctx: &Ctx, a: SynthArgs) -> Result<String, CliError> {
    let spec = match (&a.spec, &a.preset) {
        (Some(path), _) => SceneSpec::parse(&read_text(path)?)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(invalid("one of --spec or --preset is required")),
    };
    spec.validate()?;
    let targets = revisit_poses(&spec, a.targets)?;
    ctx.log(format!("rendering {} frames", spec.frames));
    let out = synth::generate(&spec, ctx.exec)?;
    let manifest = out.sequence.write(&a.out, ctx.exec)?;
    write_bytes(&a.out.join("scene.spec"), spec.to_text().as_bytes())?;
    write_trajectory(&a.out.join("revisit.traj"), &records_from_poses(&targets))?;
    Ok(format!(
        "scenemem synth ok frames={} width={} height={} targets={} manifest={}",
        manifest.frames.len(),
        manifest.intrinsics.width,
        manifest.intrinsics.height,
        targets.len(),
        a.out.join("manifest").display()
    ))
}

fn load_sequence(ctx: &Ctx, path: &Path) -> Result<(SequenceManifest, Sequence), CliError> {
    ctx.log(format!("loading {}", path.display()));
    let manifest = SequenceManifest::load(path)?;
    let seq = Sequence::load(&manifest, ctx.exec)?;
    Ok((manifest, seq))
}

fn load_targets(path: &Path) -> Result<Vec<CameraPose>, CliError> {
    let poses: Vec<CameraPose> = read_trajectory(path)?.iter().map(|r| *r.pose()).collect();
    if poses.is_empty() {
        return Err(invalid(format!("{}: no target poses", path.display())));
    }
    Ok(poses)
}

fn write_masks(dir: &Path, masks: &[BinaryMask]) -> Result<(), CliError> {
    for (i, m) in masks.iter().enumerate() {
        write_mask(&dir.join(format!("{i:04}.png")), m)?;
    }
    Ok(())
}

fn dynamic_pixels(masks: &[BinaryMask]) -> usize {
    masks.iter().map(BinaryMask::count).sum()
}

fn cmd_mask(ctx: &Ctx, a: MaskArgs) -> Result<String, CliError> {
    let cfg = a.params.config(ctx.exec)?;
    let (_, seq) = load_sequence(ctx, &a.manifest)?;
    let out = compute_masks(&seq, &cfg)?;
    let masks: Vec<BinaryMask> = out.object_masks.into_iter().map(|m| m.mask).collect();
    write_masks(&a.out, &masks)?;
    Ok(format!(
        "scenemem mask ok frames={} dynamic_pixels={} tracks_alive={}",
        masks.len(),
        dynamic_pixels(&masks),
        out.tracks.alive_count()
    ))
}

fn memory_summary(m: &SceneMemory) -> String {
    format!("frames={} points={}", m.frame_count(), m.point_count())
}

fn cmd_fuse(ctx: &Ctx, a: FuseArgs) -> Result<String, CliError> {
    let cfg = a.params.config(ctx.exec)?;
    let (manifest, seq) = load_sequence(ctx, &a.manifest)?;
    let masks: Option<Vec<BinaryMask>> = match (&a.masks, a.manifest_masks, a.no_masks) {
        (Some(dir), _, _) => Some(import_mask_dir(dir, seq.len(), &seq.intrinsics)?),
        (None, true, _) => Some(import_masks(&manifest)?),
        (None, false, true) => None,
        (None, false, false) => {
            return Err(invalid(
                "fuse needs one of --masks DIR, --manifest-masks or --no-masks",
            ))
        }
    }
    .map(|v| v.into_iter().map(|m| m.mask).collect());
    let memory = fuse_static(&seq, masks.as_deref(), &cfg)?;
    save_memory(&memory, &a.out)?;
    Ok(format!(
        "scenemem fuse ok {} masked={}",
        memory_summary(&memory),
        masks.is_some()
    ))
}

fn load_memory_checked(ctx: &Ctx, dir: &Path) -> Result<SceneMemory, CliError> {
    ctx.log(format!("loading memory {}", dir.display()));
    let m = load_memory(dir)?;
    if m.point_count() == 0 {
        return Err(invalid(format!("{}: scene memory holds no points", dir.display())));
    }
    Ok(m)
}

fn cmd_retrieve(ctx: &Ctx, a: RetrieveArgs) -> Result<String, CliError> {
    if a.n == 0 {
        return Err(invalid("--topn must be at least 1"));
    }
    let memory = load_memory_checked(ctx, &a.memory)?;
    let targets = load_targets(&a.targets)?;
    let k = memory.intrinsics;
    let shared = a
        .shared_topn
        .then(|| select_shared_top_n(&memory, &targets, &k, a.n));
    let mut text = String::new();
    for (t, pose) in targets.iter().enumerate() {
        let ids = shared
            .clone()
            .unwrap_or_else(|| select_top_n(&memory, pose, &k, a.n));
        let scores = ids
            .iter()
            .map(|&f| fov_overlap(&memory, f, pose, &k).map(|s| format!("{s:.6}")))
            .collect::<Result<Vec<_>, _>>()?;
        let ids: Vec<String> = ids.iter().map(usize::to_string).collect();
        let _ = writeln!(text, "target {t} frames={} overlap={}", ids.join(","), scores.join(","));
    }
    write_bytes(&a.out.join("retrieval.txt"), text.as_bytes())?;
    Ok(format!("scenemem retrieve ok targets={} n={}", targets.len(), a.n))
}

fn cmd_render(ctx: &Ctx, a: RenderArgs) -> Result<String, CliError> {
    let cfg = a.params.config(ctx.exec)?;
    let memory = load_memory_checked(ctx, &a.memory)?;
    let targets = load_targets(&a.targets)?;
    let prompts = render_prompts(&memory, &targets, &memory.intrinsics, &cfg)?;
    for (t, p) in prompts.iter().enumerate() {
        write_rgb(&a.out.join(format!("rgb/{t:04}.png")), &p.rgb)?;
        write_mask(&a.out.join(format!("valid/{t:04}.png")), &p.valid)?;
    }
    let coverage = prompts.iter().map(|p| p.coverage()).sum::<f64>() / prompts.len() as f64;
    Ok(format!(
        "scenemem render ok targets={} mean_coverage={coverage:.6}",
        prompts.len()
    ))
}

fn check_window(seq: &Sequence, w: usize) -> Result<(), CliError> {
    if w == 0 {
        return Err(invalid("--window must be at least 1"));
    }
    if w > seq.len() {
        return Err(invalid(format!(
            "--window {w} exceeds the {} input frames",
            seq.len()
        )));
    }
    Ok(())
}

fn cmd_bundle(ctx: &Ctx, a: BundleArgs) -> Result<String, CliError> {
    let cfg = a.params.config(ctx.exec)?;
    let (_, seq) = load_sequence(ctx, &a.manifest)?;
    check_window(&seq, a.window)?;
    let memory = load_memory_checked(ctx, &a.memory)?;
    let targets = load_targets(&a.targets)?;
    let bundle = assemble_conditioning(&seq, &memory, &targets, a.window, &cfg)?;
    write_bundle(&bundle, &a.out)?;
    Ok(format!(
        "scenemem bundle ok frames={} temporal={} spatial={}",
        bundle.len(),
        bundle.temporal.len(),
        bundle.spatial.len()
    ))
}

fn cmd_eval(ctx: &Ctx, a: EvalArgs) -> Result<String, CliError> {
    let est: Vec<CameraPose> = read_trajectory(&a.estimated)?.iter().map(|r| *r.pose()).collect();
    let reference: Vec<CameraPose> = read_trajectory(&a.reference)?.iter().map(|r| *r.pose()).collect();
    let errors = camera_errors(&est, &reference, a.align)?;
    let ate_rmse = if est.len() >= 3 { ate(&est, &reference).ok() } else { None };
    let consistency = match (&a.generated, &a.reference_manifest) {
        (Some(dir), Some(mpath)) => {
            let (_, seq) = load_sequence(ctx, mpath)?;
            let generated = (0..est.len())
                .map(|i| Ok(ImageF64::from_rgb(&read_rgb(&dir.join(format!("{i:04}.png")))?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            let refs: Vec<ImageF64> = seq.frames.iter().map(|f| ImageF64::from_rgb(&f.rgb)).collect();
            let masks = if a.static_only {
                Some(
                    seq.frames
                        .iter()
                        .enumerate()
                        .map(|(i, f)| {
                            f.mask
                                .clone()
                                .ok_or_else(|| invalid(format!("reference frame {i} has no mask")))
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                )
            } else {
                None
            };
            let pairs = pair_by_nearest_pose(&est, &seq.poses, 1.0);
            // Surface dimension problems before anything is written.
            if let (Some(g), Some(r)) = (generated.first(), refs.first()) {
                image_metrics(g, r, None)?;
            }
            Some(revisit_consistency(&generated, &refs, &pairs, masks.as_deref(), ctx.exec)?)
        }
        _ => None,
    };
    let text = report_text(Some(&errors), ate_rmse, consistency.as_ref());
    write_bytes(&a.out.join("report.txt"), text.as_bytes())?;
    let mut summary = format!(
        "scenemem eval ok frames={} mRotErr={:.6} mTransErr={:.6} mCamMC={:.6}",
        est.len(),
        errors.m_rot_err,
        errors.m_trans_err,
        errors.m_cammc
    );
    if let Some(v) = ate_rmse {
        let _ = write!(summary, " ATE={v:.6}");
    }
    if let Some(c) = &consistency {
        let _ = write!(summary, " PSNR={:.4} SSIM={:.4}", c.mean_psnr, c.mean_ssim);
    }
    Ok(summary)
}

fn cmd_pipeline(ctx: &Ctx, a: PipelineArgs) -> Result<String, CliError> {
    let mask_cfg = a.mask.config(ctx.exec)?;
    let fuse_cfg = a.fuse.config(ctx.exec)?;
    let prompt_cfg = a.prompt.config(ctx.exec)?;
    let (_, seq) = load_sequence(ctx, &a.manifest)?;
    check_window(&seq, a.window)?;
    let targets = load_targets(&a.targets)?;

    ctx.log("masking");
    let masks: Vec<BinaryMask> = compute_masks(&seq, &mask_cfg)?
        .object_masks
        .into_iter()
        .map(|m| m.mask)
        .collect();
    ctx.log("fusing");
    let memory = fuse_static(&seq, Some(&masks), &fuse_cfg)?;
    ctx.log("rendering");
    let bundle = assemble_conditioning(&seq, &memory, &targets, a.window, &prompt_cfg)?;

    write_masks(&a.out.join("masks"), &masks)?;
    save_memory(&memory, &a.out.join("memory"))?;
    write_bundle(&bundle, &a.out.join("bundle"))?;
    Ok(format!(
        "scenemem pipeline ok frames={} dynamic_pixels={} points={} bundle_frames={} temporal={} spatial={}",
        seq.len(),
        dynamic_pixels(&masks),
        memory.point_count(),
        bundle.len(),
        bundle.temporal.len(),
        bundle.spatial.len()
    ))
}
