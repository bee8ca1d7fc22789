use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use pickdrop_core::dropping::{align_cloud, compute_drop};
use pickdrop_core::geom::{CameraIntrinsics, PointCloud, Pose, Vec2, Vec3};
use pickdrop_core::grasping::{filter_by_mask, parse_proposals, pregrasp_trajectory, rank_grasps};
use pickdrop_core::mask::RleMask;
use pickdrop_core::memory::{QueryResult, VoxelMap};
use pickdrop_core::navigation::{plan_path, select_nav_target, NavTarget, ObstacleGrid, Path as GridPath};
use pickdrop_core::pipeline::{
    build_map_with, grid_from_map, load_scan, nearest_free_cell, random_apartment, read_ply, read_scene_file, run_task,
    write_ply, write_scene, EmbeddingProvider, MapConfig, PrecomputedEmbeddings, PrecomputedGrasps, Providers,
    SceneFile, SceneSpec, SyntheticWorld, TaskConfig, TaskSpec,
};

#[derive(Parser)]
#[command(name = "pickdrop", version, about = "Language-driven pick-and-drop planning over posed RGB-D scans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: scan archive, ground truth and scene file.
    GenScene {
        /// Scene spec JSON, or `random` for a random apartment.
        #[arg(long)]
        spec: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a voxel map (and optionally its obstacle grid) from a scan.
    BuildMap {
        #[arg(long)]
        scan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the inflated obstacle grid as text.
        #[arg(long)]
        grid_out: Option<PathBuf>,
        /// Map parameters as JSON; omitted fields keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Retrieve voxels matching a text query.
    Query {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        text: String,
        /// Return the match closest to this anchor object.
        #[arg(long)]
        near: Option<String>,
        #[arg(short, long, default_value_t = 1)]
        k: usize,
        #[command(flatten)]
        text_source: TextSource,
    },
    /// Pick a standing point near a world position and plan a path to it.
    PlanNav {
        #[arg(long)]
        map: PathBuf,
        /// Obstacle grid text; derived from the map when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Object position `X,Y` in meters.
        #[arg(long, value_parser = parse_floats::<2>)]
        target: [f64; 2],
        /// Robot start `X,Y`; defaults to the grid center.
        #[arg(long, value_parser = parse_floats::<2>)]
        start: Option<[f64; 2]>,
    },
    /// Keep grasp proposals inside an object mask and rank them.
    FilterGrasps {
        /// Proposal file, one `px py pz ax ay az width height depth score` per line.
        #[arg(long)]
        proposals: PathBuf,
        /// Mask file (`rle W H` header, then run lengths).
        #[arg(long)]
        mask: PathBuf,
        /// Camera JSON: `{"intrinsics": {...}, "pose": [12 row-major numbers]}`.
        #[arg(long)]
        camera: PathBuf,
    },
    /// Compute a drop point over a segmented receptacle cloud.
    PlanDrop {
        /// ASCII PLY cloud in world coordinates.
        #[arg(long)]
        cloud: PathBuf,
        /// Robot pose `X,Y,HX,HY`: position and unit heading.
        #[arg(long, value_parser = parse_floats::<4>)]
        robot: [f64; 4],
    },
    /// Run the full pick-and-drop task in a generated scene.
    RunTask {
        #[arg(long)]
        map: PathBuf,
        /// Obstacle grid text; derived from the map when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Scene directory written by `gen-scene`; provides camera, segmenter and grasps.
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        pick: String,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        drop: String,
        #[arg(long)]
        report: PathBuf,
        /// Replace the scene's text embedder with a precomputed table.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Replace the scene's grasp generator with a fixed proposal file.
        #[arg(long)]
        proposals: Option<PathBuf>,
        /// Task parameters as JSON; omitted fields keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Export a map as an obstacle grid or a point cloud of voxel centers.
    Export {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
#[group(required = true, multiple = false)]
struct TextSource {
    /// Embed text with the vocabulary of a generated scene.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Embed text from a precomputed JSON table `{text: [floats]}`.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    GridText,
    PlyPoints,
}

#[derive(Deserialize)]
struct CameraFile {
    intrinsics: CameraIntrinsics,
    pose: Pose,
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number")))
        .collect::<Result<_, _>>()?;
    vals.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_map(path: &Path) -> Result<VoxelMap> {
    VoxelMap::load(path).with_context(|| format!("loading map {}", path.display()))
}

fn load_grid(grid: Option<&Path>, map: &VoxelMap) -> Result<ObstacleGrid> {
    match grid {
        Some(p) => ObstacleGrid::from_text(&read(p)?).with_context(|| format!("parsing grid {}", p.display())),
        None => grid_from_map(map, &MapConfig::default()).context("deriving obstacle grid from map"),
    }
}

fn load_world(dir: &Path) -> Result<SyntheticWorld> {
    let scene = read_scene_file(dir).with_context(|| format!("reading scene {}", dir.display()))?;
    SyntheticWorld::new(scene.spec, scene.seed).context("rebuilding scene")
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn gen_scene(spec: &str, seed: u64, out: &Path) -> Result<()> {
    let file = if spec == "random" {
        let apt = random_apartment(seed);
        SceneFile { seed, spec: apt.spec, task: Some(apt.task) }
    } else {
        let spec: SceneSpec = read_json(Path::new(spec))?;
        SceneFile { seed, spec, task: None }
    };
    let (scan, _) = write_scene(out, &file).context("generating scene")?;
    let mut summary = serde_json::json!({
        "out": out.display().to_string(),
        "frames": scan.len(),
        "entities": file.spec.entities.iter().map(|e| e.label.clone()).collect::<Vec<_>>(),
    });
    if let Some(task) = &file.task {
        summary["task"] = serde_json::to_value(task)?;
    }
    print_json(&summary)
}

fn build(scan: &Path, out: &Path, grid_out: Option<&Path>, config: Option<&Path>) -> Result<()> {
    let config: MapConfig = match config {
        Some(p) => read_json(p)?,
        None => MapConfig::default(),
    };
    let scan = load_scan(scan).with_context(|| format!("loading scan {}", scan.display()))?;
    let (map, grid) = build_map_with(&scan, &config)?;
    map.save(out).with_context(|| format!("writing map {}", out.display()))?;
    if let Some(g) = grid_out {
        write(g, &grid.to_text())?;
    }
    print_json(&serde_json::json!({
        "frames": scan.len(),
        "voxels": map.len(),
        "grid": [grid.rows(), grid.cols()],
    }))
}

fn embedder(source: &TextSource) -> Result<Box<dyn EmbeddingProvider>> {
    if let Some(p) = &source.embeddings {
        return Ok(Box::new(PrecomputedEmbeddings::load(p).with_context(|| format!("loading {}", p.display()))?));
    }
    let dir = source.scene.as_deref().ok_or_else(|| anyhow!("pass --scene or --embeddings"))?;
    Ok(Box::new(load_world(dir)?.vocabulary().clone()))
}

fn query(map: &Path, text: &str, near: Option<&str>, k: usize, source: &TextSource) -> Result<()> {
    let map = load_map(map)?;
    let embed = embedder(source)?;
    let q = embed.embed_text(text).with_context(|| format!("embedding `{text}`"))?;
    match near {
        Some(anchor) => {
            let a = embed.embed_text(anchor).with_context(|| format!("embedding `{anchor}`"))?;
            print_json(&map.query_near(&q, &a)?)
        }
        None => {
            let results: Vec<QueryResult> = map.query(&q, k)?;
            print_json(&results)
        }
    }
}

fn plan_nav(map: &Path, grid: Option<&Path>, target: [f64; 2], start: Option<[f64; 2]>) -> Result<()> {
    let map = load_map(map)?;
    let grid = load_grid(grid, &map)?;
    let start_p = start.map_or_else(
        || {
            let (w, h) = (grid.cols() as f64 * grid.cell_size(), grid.rows() as f64 * grid.cell_size());
            grid.origin() + Vec2::new(w / 2.0, h / 2.0)
        },
        |[x, y]| Vec2::new(x, y),
    );
    let start = nearest_free_cell(&grid, start_p).ok_or_else(|| anyhow!("no free cell to start from"))?;
    let goal: NavTarget = select_nav_target(&grid, Vec2::new(target[0], target[1])).context("selecting target")?;
    let path: GridPath = plan_path(&grid, start, goal.cell).context("planning path")?;
    print_json(&serde_json::json!({ "start": start, "target": goal, "path": path }))
}

fn filter_grasps(proposals: &Path, mask: &Path, camera: &Path) -> Result<()> {
    let proposals = parse_proposals(&read(proposals)?).context("parsing proposals")?;
    let mask = RleMask::from_text(&read(mask)?).context("parsing mask")?;
    let camera: CameraFile = read_json(camera)?;
    let kept = filter_by_mask(&proposals, &mask, &camera.intrinsics, &camera.pose)?;
    let ranking = rank_grasps(&kept, &Vec3::z()).context("no proposal projects inside the mask")?;
    let trajectory = pregrasp_trajectory(&ranking.best().proposal)?;
    print_json(&serde_json::json!({
        "proposals": proposals.len(),
        "in_mask": kept.len(),
        "ranked": ranking.ranked,
        "trajectory": trajectory,
    }))
}

fn plan_drop(cloud: &Path, robot: [f64; 4]) -> Result<()> {
    let cloud: PointCloud = read_ply(&read(cloud)?).context("parsing cloud")?;
    let [x, y, hx, hy] = robot;
    let (position, heading) = (Vec2::new(x, y), Vec2::new(hx, hy));
    let aligned = align_cloud(&cloud, position, heading)?;
    let d = compute_drop(&aligned)?;
    let left = Vec2::new(-heading.y, heading.x);
    let xy = position + d.x_m * heading + d.y_m * left;
    print_json(&serde_json::json!({ "drop_point": d, "release": [xy.x, xy.y, d.z_max] }))
}

#[allow(clippy::too_many_arguments)]
fn run(
    map: &Path,
    grid: Option<&Path>,
    scene: &Path,
    task: TaskSpec,
    report: &Path,
    embeddings: Option<&Path>,
    proposals: Option<&Path>,
    config: Option<&Path>,
) -> Result<bool> {
    let map = load_map(map)?;
    let grid = load_grid(grid, &map)?;
    let world = load_world(scene)?;
    let config: TaskConfig = match config {
        Some(p) => read_json(p)?,
        None => TaskConfig::default(),
    };
    let table = embeddings.map(PrecomputedEmbeddings::load).transpose().context("loading embeddings")?;
    let grasps = proposals.map(PrecomputedGrasps::load).transpose().context("loading proposals")?;
    let providers = Providers {
        embedder: table.as_ref().map_or(world.vocabulary() as &dyn EmbeddingProvider, |t| t),
        camera: &world,
        grasper: grasps.as_ref().map_or(&world as _, |g| g),
        segmenter: &world,
    };
    let r = run_task(&map, &grid, &task, providers, &config);
    write(report, &r.to_json())?;
    match &r.failure {
        None => {
            println!("task `{}` completed; report written to {}", task.describe(), report.display());
            Ok(true)
        }
        Some(f) => {
            eprintln!("error: stage {} failed: {}", f.stage, f.reason);
            Ok(false)
        }
    }
}

fn export(map: &Path, format: ExportFormat, out: Option<&Path>) -> Result<()> {
    let map = load_map(map)?;
    let text = match format {
        ExportFormat::GridText => grid_from_map(&map, &MapConfig::default())?.to_text(),
        ExportFormat::PlyPoints => {
            let points = map.entries().map(|(i, _, _)| i.center(map.voxel_size())).collect();
            write_ply(&PointCloud::new(points))
        }
    };
    match out {
        Some(p) => write(p, &text),
        None => emit(&text),
    }
}

fn stage_name(command: &Command) -> &'static str {
    match command {
        Command::GenScene { .. } => "gen-scene",
        Command::BuildMap { .. } => "build-map",
        Command::Query { .. } => "query",
        Command::PlanNav { .. } => "plan-nav",
        Command::FilterGrasps { .. } => "filter-grasps",
        Command::PlanDrop { .. } => "plan-drop",
        Command::RunTask { .. } => "run-task",
        Command::Export { .. } => "export",
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::GenScene { spec, seed, out } => gen_scene(&spec, seed, &out)?,
        Command::BuildMap { scan, out, grid_out, config } => {
            build(&scan, &out, grid_out.as_deref(), config.as_deref())?
        }
        Command::Query { map, text, near, k, text_source } => query(&map, &text, near.as_deref(), k, &text_source)?,
        Command::PlanNav { map, grid, target, start } => plan_nav(&map, grid.as_deref(), target, start)?,
        Command::FilterGrasps { proposals, mask, camera } => filter_grasps(&proposals, &mask, &camera)?,
        Command::PlanDrop { cloud, robot } => plan_drop(&cloud, robot)?,
        Command::RunTask { map, grid, scene, pick, from, drop, report, embeddings, proposals, config } => {
            let task = TaskSpec::new(&pick, from.as_deref(), &drop)?;
            return run(
                &map,
                grid.as_deref(),
                &scene,
                task,
                &report,
                embeddings.as_deref(),
                proposals.as_deref(),
                config.as_deref(),
            );
        }
        Command::Export { map, format, out } => export(&map, format, out.as_deref())?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = stage_name(&cli.command);
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {stage}: {e:#}");
            ExitCode::FAILURE
        }
    }
}
