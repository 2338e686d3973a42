mod frames;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use splatvote::affordance::{affordance_segment, FeatureMap, DEFAULT_K};
use splatvote::evaluation::{evaluate, split_frames, EvalFrame, DEFAULT_THRESHOLD};
use splatvote::segmentation::{delete, extract, segment_with, SegmentMethod, DEFAULT_EPSILON};
use splatvote::splatting::render;
use splatvote::{io, pruning, Camera, Error, GaussianScene, Mask2D, RenderConfig, Result};

const WORKERS_ENV: &str = "SPLATVOTE_WORKERS";

#[derive(Parser)]
#[command(
    name = "splatvote",
    version,
    about = "Segment, label and prune Gaussian splat scenes by influence voting"
)]
struct Cli {
    /// Worker threads (0 = one per core). SPLATVOTE_WORKERS takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ours,
    Baseline1,
    Baseline2,
}

impl From<Method> for SegmentMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Ours => SegmentMethod::Ours,
            Method::Baseline1 => SegmentMethod::Baseline1,
            Method::Baseline2 => SegmentMethod::Baseline2,
        }
    }
}

#[derive(clap::Args)]
struct Split {
    /// Use an even-stride subset of the frames (the rest is for evaluation).
    #[arg(long)]
    split_fraction: Option<f64>,
    /// Shifts the stride pattern.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Render every camera to <out>/<index>.png.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lift 2D masks to a Gaussian mask.
    Segment {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        /// Directory of mask PNGs named by frame index.
        #[arg(long)]
        masks: PathBuf,
        #[arg(long, value_enum, default_value = "ours")]
        method: Method,
        /// Influence threshold of baseline2.
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[command(flatten)]
        split: Split,
        /// Output GMSK file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep only the masked Gaussians.
    Extract {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove the masked Gaussians.
    Delete {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label Gaussians from per-frame patch features and labelled exemplars.
    Affordance {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        /// Directory of FMAP files named by frame index.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        exemplars: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Output GLBL file.
        #[arg(long)]
        out: PathBuf,
        /// Also write each frame's 2D label map here.
        #[arg(long)]
        label_maps: Option<PathBuf>,
    },
    /// Drop Gaussians that no camera ever sees.
    Prune {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the full JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a Gaussian mask against ground-truth 2D masks.
    EvalMiou {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        /// Directory of ground-truth mask PNGs named by frame index.
        #[arg(long)]
        masks: PathBuf,
        /// Grayscale threshold for the rendered mask.
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// With a split, only the evaluation frames are scored.
        #[command(flatten)]
        split: Split,
        /// Write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print scene statistics.
    Info {
        #[arg(long)]
        scene: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) => 2,
        Error::Io { .. } | Error::Format { .. } | Error::Data { .. } => 3,
        Error::Dimension(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .json()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();

    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            tracing::error!(error = %e, "command failed");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn workers(flag: usize) -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::Usage(format!(
                "{WORKERS_ENV} must be a non-negative integer, got '{v}'"
            ))
        }),
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> Result<Value> {
    let threads = workers(cli.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {threads} workers: {e}")))?;
    tracing::info!(workers = pool.current_num_threads(), "starting");
    pool.install(|| dispatch(cli.command))
}

fn load_scene(path: &Path) -> Result<GaussianScene> {
    let scene = io::load_ply(path)?;
    tracing::info!(file = %path.display(), gaussians = scene.len(), sh_degree = scene.sh_degree(), "loaded scene");
    Ok(scene)
}

fn check_mask_len(
    mask: &splatvote::GaussianMask,
    scene: &GaussianScene,
    path: &Path,
) -> Result<()> {
    if mask.len() != scene.len() {
        return Err(Error::Dimension(format!(
            "{}: mask has {} entries, scene has {} Gaussians",
            path.display(),
            mask.len(),
            scene.len()
        )));
    }
    Ok(())
}

fn check_size(path: &Path, index: usize, camera: &Camera, width: u32, height: u32) -> Result<()> {
    if (width, height) != (camera.width, camera.height) {
        return Err(Error::Dimension(format!(
            "{}: {width}x{height} but camera {index} is {}x{}",
            path.display(),
            camera.width,
            camera.height
        )));
    }
    Ok(())
}

/// Loads the masks in `dir`, restricted to `allowed` frame indices if given.
fn load_masks(
    dir: &Path,
    cameras: &[Camera],
    allowed: Option<&[usize]>,
) -> Result<Vec<(usize, Camera, Mask2D)>> {
    let mut out = Vec::new();
    for (index, path) in frames::index_dir(dir, "png", cameras.len())? {
        if allowed.is_some_and(|a| !a.contains(&index)) {
            continue;
        }
        let mask = io::load_mask(&path)?;
        check_size(&path, index, &cameras[index], mask.width, mask.height)?;
        out.push((index, cameras[index].clone(), mask));
    }
    if out.is_empty() {
        return Err(Error::Usage(format!(
            "no masks in {} for the selected frames",
            dir.display()
        )));
    }
    Ok(out)
}

fn split_sets(split: &Split, n: usize) -> Result<Option<splatvote::evaluation::FrameSplit>> {
    split
        .split_fraction
        .map(|f| split_frames(n, f, split.seed))
        .transpose()
}

fn select(scene: &Path, mask: &Path, out: &Path, command: &str) -> Result<Value> {
    let scene = load_scene(scene)?;
    let gmask = io::load_gaussian_mask(mask)?;
    check_mask_len(&gmask, &scene, mask)?;
    let result = if command == "extract" {
        extract(&scene, &gmask)?
    } else {
        delete(&scene, &gmask)?
    };
    let clamped = io::save_ply(&result, out)?;
    Ok(json!({
        "command": command,
        "input_count": scene.len(),
        "output_count": result.len(),
        "clamped_opacities": clamped,
        "out": out,
    }))
}

fn dispatch(command: Command) -> Result<Value> {
    let cfg = RenderConfig::default();
    match command {
        Command::Render {
            scene,
            cameras,
            out,
        } => {
            let scene = load_scene(&scene)?;
            let cameras = io::load_cameras(&cameras)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            for (i, camera) in cameras.iter().enumerate() {
                io::save_rendered_png(
                    &render(&scene, camera, &cfg),
                    out.join(format!("{i:05}.png")),
                )?;
            }
            Ok(json!({"command": "render", "frames": cameras.len(), "out": out}))
        }
        Command::Segment {
            scene,
            cameras,
            masks,
            method,
            epsilon,
            split,
            out,
        } => {
            let scene = load_scene(&scene)?;
            let cameras = io::load_cameras(&cameras)?;
            let split = split_sets(&split, cameras.len())?;
            let frames = load_masks(
                &masks,
                &cameras,
                split.as_ref().map(|s| s.segment.as_slice()),
            )?;
            let used: Vec<usize> = frames.iter().map(|f| f.0).collect();
            let frames: Vec<(Camera, Mask2D)> =
                frames.into_iter().map(|(_, c, m)| (c, m)).collect();
            let seg = segment_with(method.into(), &scene, &frames, epsilon, &cfg)?;
            io::save_gaussian_mask(&seg.mask, &out)?;
            let votes = &seg.votes.0;
            Ok(json!({
                "command": "segment",
                "method": SegmentMethod::from(method),
                "gaussians": scene.len(),
                "selected": seg.mask.count(),
                "positive_votes": votes.iter().filter(|&&v| v > 0.0).count(),
                "negative_votes": votes.iter().filter(|&&v| v < 0.0).count(),
                "zero_votes": votes.iter().filter(|&&v| v == 0.0).count(),
                "frames_used": used,
                "out": out,
            }))
        }
        Command::Extract { scene, mask, out } => select(&scene, &mask, &out, "extract"),
        Command::Delete { scene, mask, out } => select(&scene, &mask, &out, "delete"),
        Command::Affordance {
            scene,
            cameras,
            features,
            exemplars,
            k,
            out,
            label_maps,
        } => {
            let scene = load_scene(&scene)?;
            let cameras = io::load_cameras(&cameras)?;
            let exemplars = io::load_exemplars(&exemplars)?;
            let mut frames: Vec<(Camera, FeatureMap)> = Vec::new();
            let mut used = Vec::new();
            for (index, path) in frames::index_dir(&features, "fmap", cameras.len())? {
                let map = io::load_feature_map(&path)?;
                map.check_covers(cameras[index].width, cameras[index].height)
                    .map_err(|e| {
                        Error::Dimension(format!("{}: camera {index}: {e}", path.display()))
                    })?;
                frames.push((cameras[index].clone(), map));
                used.push(index);
            }
            let result = affordance_segment(&scene, &frames, &exemplars, k, &cfg)?;
            io::save_gaussian_labels(&result.labels, &out)?;
            if let Some(dir) = &label_maps {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                for (index, map) in used.iter().zip(&result.label_maps) {
                    io::save_label_map(map, dir.join(format!("{index:05}.png")))?;
                }
            }
            let mut counts = vec![0usize; exemplars.label_count()];
            for &l in &result.labels {
                counts[usize::from(l)] += 1;
            }
            let per_label: serde_json::Map<String, Value> = exemplars
                .labels()
                .iter()
                .cloned()
                .zip(counts.into_iter().map(Value::from))
                .collect();
            Ok(json!({
                "command": "affordance",
                "gaussians": scene.len(),
                "per_label": per_label,
                "zero_norm_patches": result.zero_norm_patches,
                "frames_used": used,
                "out": out,
            }))
        }
        Command::Prune {
            scene,
            cameras,
            out,
            report,
        } => {
            let scene = load_scene(&scene)?;
            let cameras = io::load_cameras(&cameras)?;
            let (pruned, rep) = pruning::prune(&scene, &cameras, &cfg)?;
            io::save_ply(&pruned, &out)?;
            if let Some(path) = &report {
                let text = serde_json::to_string_pretty(&rep).expect("report serializes");
                std::fs::write(path, text).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
            }
            Ok(json!({
                "command": "prune",
                "original_count": rep.original_count,
                "pruned_count": rep.pruned_count,
                "removed_fraction": rep.removed_fraction,
                "max_abs_pixel_error": rep.max_abs_pixel_error,
                "out": out,
            }))
        }
        Command::EvalMiou {
            scene,
            mask,
            cameras,
            masks,
            threshold,
            split,
            out,
        } => {
            let scene = load_scene(&scene)?;
            let gmask = io::load_gaussian_mask(&mask)?;
            check_mask_len(&gmask, &scene, &mask)?;
            let cameras = io::load_cameras(&cameras)?;
            let split = split_sets(&split, cameras.len())?;
            let frames: Vec<EvalFrame> =
                load_masks(&masks, &cameras, split.as_ref().map(|s| s.eval.as_slice()))?
                    .into_iter()
                    .map(|(index, camera, gt)| EvalFrame { index, camera, gt })
                    .collect();
            let report = evaluate(&scene, &gmask, &frames, threshold, &cfg)?;
            if let Some(path) = &out {
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                std::fs::write(path, text).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
            }
            Ok(json!({
                "command": "eval-miou",
                "miou": report.miou,
                "recall": report.recall,
                "frames_used": report.frames_used,
            }))
        }
        Command::Info { scene: path } => {
            let scene = load_scene(&path)?;
            let mut lo = [f32::INFINITY; 3];
            let mut hi = [f32::NEG_INFINITY; 3];
            for m in scene.means() {
                for k in 0..3 {
                    lo[k] = lo[k].min(m[k]);
                    hi[k] = hi[k].max(m[k]);
                }
            }
            let opacity_mean = if scene.is_empty() {
                0.0
            } else {
                scene.opacities().iter().map(|&o| f64::from(o)).sum::<f64>() / scene.len() as f64
            };
            let bounds = (!scene.is_empty()).then(|| json!({"min": lo, "max": hi}));
            Ok(json!({
                "command": "info",
                "gaussians": scene.len(),
                "sh_degree": scene.sh_degree(),
                "bounds": bounds,
                "opacity_mean": opacity_mean,
            }))
        }
    }
}
