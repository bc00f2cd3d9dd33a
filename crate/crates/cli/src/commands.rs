//! The `simulate`, `process`, `select`, `evaluate` and `run-all` commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use safeland_core::cloud::{
    classify_cloud, mls_smooth, statistical_outlier_removal, voxel_downsample,
};
use safeland_core::geometry::{depth_to_cloud, transform_cloud, CameraConfig, Frame, Point3};
use safeland_core::grid::{export_map, ClassMap, FrameEvidence, GridMap};
use safeland_core::selector::{annotate_map, select_on_map, DroneState, LandingPatch};
use safeland_core::semantics::{filter_cloud_by_semantics, ClassTable};
use safeland_core::sim::{
    build_scene, evaluate_class_map, generate_trajectory, render_frame, EvalReport, RenderOptions,
    SceneSpec, TrajectorySpec,
};
use safeland_core::{Error, Result};

use crate::config::RunConfig;
use crate::dataset::{self, FrameRecord};

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

/// Per-frame RNG seed: one stream per frame, independent of thread count.
fn frame_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (index as u64)
            .wrapping_add(1)
            .wrapping_mul(0xD1B5_4A32_D192_ED03)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub frames: usize,
    /// Position of the camera in the last frame, if any.
    pub last_position: Option<Point3>,
}

/// Renders a dataset for `scene` flown along `trajectory` into `out`.
pub fn cmd_simulate(
    scene: &SceneSpec,
    trajectory: &TrajectorySpec,
    cfg: &RunConfig,
    out: &Path,
) -> Result<SimulateSummary> {
    cfg.validate()?;
    let table = ClassTable::default();
    let (world, truth) = build_scene(scene, &table)?;
    if trajectory.altitude <= world.max_height() {
        return Err(Error::InvalidArgument(format!(
            "altitude {} is not above the tallest obstacle ({:.3} m)",
            trajectory.altitude,
            world.max_height()
        )));
    }
    let poses = generate_trajectory(trajectory, world.extent())?;
    let camera = cfg.camera.config()?;

    dataset::create_dir(out)?;
    dataset::write_text(&out.join(dataset::INTRINSICS), &camera.to_text())?;
    dataset::write_text(&out.join(dataset::CLASSES), &table.to_text())?;
    dataset::write_text(&out.join("scene.txt"), &scene.to_text())?;
    dataset::write_text(&out.join("trajectory.txt"), &trajectory.to_text())?;
    truth.write_image(out, "truth")?;

    pool(cfg.threads)?.install(|| {
        poses.par_iter().enumerate().try_for_each(|(i, pose)| {
            let opts = RenderOptions {
                noise_sigma: cfg.noise_sigma,
                label_corruption: cfg.label_corruption,
                seed: frame_seed(cfg.seed, i),
            };
            let bundle = render_frame(&world, &pose.world_from_camera, &camera, &opts)?;
            dataset::write_frame(
                &dataset::frame_dir(out, i),
                &bundle,
                pose.timestamp,
                &pose.world_from_camera,
            )
        })
    })?;
    Ok(SimulateSummary {
        frames: poses.len(),
        last_position: poses
            .last()
            .map(|p| Point3::from(*p.world_from_camera.translation())),
    })
}

pub const STAGES: [&str; 9] = [
    "load",
    "backproject",
    "semantic",
    "transform",
    "voxel",
    "sor",
    "mls",
    "classify",
    "grid",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FrameTiming {
    pub name: String,
    /// Milliseconds per entry of [`STAGES`].
    pub stages_ms: [f64; 9],
    pub total_ms: f64,
}

impl FrameTiming {
    pub fn line(&self) -> String {
        let mut s = format!("frame={}", self.name);
        for (name, ms) in STAGES.iter().zip(&self.stages_ms) {
            let _ = write!(s, " {name}={ms:.6}");
        }
        let _ = write!(s, " total={:.6}", self.total_ms);
        s
    }
}

struct Stopwatch {
    start: Instant,
    last: Instant,
    stages: [f64; 9],
    next: usize,
}

impl Stopwatch {
    fn start() -> Self {
        let now = Instant::now();
        Self {
            start: now,
            last: now,
            stages: [0.0; 9],
            next: 0,
        }
    }

    fn lap(&mut self) {
        let now = Instant::now();
        self.stages[self.next] = (now - self.last).as_secs_f64() * 1e3;
        self.last = now;
        self.next += 1;
    }
}

struct FrameResult {
    evidence: FrameEvidence,
    watch: Stopwatch,
}

fn process_frame(
    frame: &FrameRecord,
    camera: &CameraConfig,
    table: &ClassTable,
    cfg: &RunConfig,
    seed: u64,
) -> Result<FrameResult> {
    let mut w = Stopwatch::start();
    let intr = &camera.intrinsics;
    let depth = dataset::load_depth(frame, camera)?;
    let labels = dataset::load_labels(frame)?;
    w.lap();
    let cloud = depth_to_cloud(&depth, intr)?;
    w.lap();
    let split = filter_cloud_by_semantics(&cloud, &labels, intr, &camera.sl_to_rgb, table)?;
    w.lap();
    let safe = transform_cloud(&split.safe, &frame.world_from_camera, Frame::World);
    let semantic_hazard = transform_cloud(&split.hazard, &frame.world_from_camera, Frame::World);
    w.lap();
    let p = &cfg.pipeline;
    let safe = voxel_downsample(&safe, p.leaf_size)?;
    w.lap();
    let safe = statistical_outlier_removal(&safe, p.sor_neighbors, p.sor_std_mult)?;
    w.lap();
    let safe = mls_smooth(&safe, p.mls_radius)?;
    w.lap();
    let classified = classify_cloud(&safe, p, seed);
    let evidence = FrameEvidence::from_cloud_sets(
        &[&classified.split.safe],
        &[&classified.split.hazard, &semantic_hazard],
        cfg.resolution,
    );
    w.lap();
    Ok(FrameResult { evidence, watch: w })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSummary {
    pub grid: GridMap,
    pub map: ClassMap,
    pub timings: Vec<FrameTiming>,
    pub last_position: Option<Point3>,
}

/// Runs the mapping pipeline over every frame of `dataset` and writes
/// `map.pgm`, `map.hdr`, `map_observed.pgm`, `timing.txt` and `config.txt`
/// into `out`. Frames are conditioned in parallel; their evidence enters the
/// grid strictly in timestamp order.
pub fn cmd_process(dataset_dir: &Path, cfg: &RunConfig, out: &Path) -> Result<ProcessSummary> {
    cfg.validate()?;
    let frames = dataset::list_frames(dataset_dir)?;
    let camera = dataset::load_camera(dataset_dir)?;
    let table = dataset::load_classes(dataset_dir)?;
    dataset::create_dir(out)?;
    let workers = pool(cfg.threads)?;
    let batch = workers.current_num_threads().max(1) * 2;

    let mut grid = GridMap::new(cfg.resolution)?;
    let mut timings = Vec::with_capacity(frames.len());
    for (chunk_index, chunk) in frames.chunks(batch).enumerate() {
        let results: Vec<Result<FrameResult>> = workers.install(|| {
            chunk
                .par_iter()
                .enumerate()
                .map(|(j, f)| {
                    process_frame(
                        f,
                        &camera,
                        &table,
                        cfg,
                        frame_seed(cfg.seed, chunk_index * batch + j),
                    )
                })
                .collect()
        });
        for (frame, result) in chunk.iter().zip(results) {
            let FrameResult {
                evidence,
                mut watch,
            } = result?;
            // the frame may have waited for its batch; only the worker span and
            // the update itself count
            let worker_ms = (watch.last - watch.start).as_secs_f64() * 1e3;
            watch.last = Instant::now();
            grid.apply(&evidence, &cfg.grid);
            watch.lap();
            let name = frame
                .dir
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string();
            let total_ms = worker_ms + watch.stages[STAGES.len() - 1];
            timings.push(FrameTiming {
                name,
                stages_ms: watch.stages,
                total_ms,
            });
        }
    }

    let map = export_map(&grid, &cfg.grid);
    map.write(out, "map")?;
    let mut log = String::new();
    for t in &timings {
        let _ = writeln!(log, "{}", t.line());
    }
    dataset::write_text(&out.join("timing.txt"), &log)?;
    write_config_echo(cfg, out, &[("dataset", dataset_dir)])?;
    Ok(ProcessSummary {
        grid,
        map,
        timings,
        last_position: frames
            .last()
            .map(|f| Point3::from(*f.world_from_camera.translation())),
    })
}

fn write_config_echo(cfg: &RunConfig, out: &Path, paths: &[(&str, &Path)]) -> Result<()> {
    let mut text = String::new();
    for (k, p) in paths {
        let _ = writeln!(text, "# {k}: {}", p.display());
    }
    text.push_str(&cfg.to_text());
    dataset::write_text(&out.join("config.txt"), &text)
}

/// Picks the landing site on a map written by `process`.
pub fn cmd_select(
    map_path: &Path,
    drone: &DroneState,
    cfg: &RunConfig,
) -> Result<(ClassMap, Option<LandingPatch>)> {
    cfg.validate()?;
    let map = ClassMap::read(map_path)?;
    let site = select_on_map(&map, drone, &cfg.selector)?;
    Ok((map, site))
}

pub fn site_text(site: Option<&LandingPatch>) -> String {
    match site {
        Some(s) => format!("{}\n", s.report_line()),
        None => "NO_SITE\n".to_string(),
    }
}

pub fn cmd_evaluate(map_path: &Path, truth_path: &Path) -> Result<EvalReport> {
    let map = ClassMap::read(map_path)?;
    let truth = ClassMap::read(truth_path)?;
    evaluate_class_map(&map, &truth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunAllSummary {
    pub report: EvalReport,
    pub site: Option<LandingPatch>,
    pub process: ProcessSummary,
}

/// simulate, process, select from the last camera position, evaluate.
/// Everything lands under `out`: the dataset in `out/dataset`, the map,
/// `site.txt`, `map_site.pgm` and `eval.txt` beside it.
pub fn cmd_run_all(
    scene: &SceneSpec,
    trajectory: &TrajectorySpec,
    cfg: &RunConfig,
    out: &Path,
) -> Result<RunAllSummary> {
    let data: PathBuf = out.join("dataset");
    cmd_simulate(scene, trajectory, cfg, &data)?;
    let process = cmd_process(&data, cfg, out)?;
    let site = match process.last_position {
        Some(p) => select_on_map(
            &process.map,
            &DroneState::new(p, trajectory.yaw)?,
            &cfg.selector,
        )?,
        None => None,
    };
    dataset::write_text(&out.join("site.txt"), &site_text(site.as_ref()))?;
    if let Some(s) = &site {
        annotate_map(&process.map, s).write(out.join("map_site.pgm"))?;
    }
    let truth = ClassMap::read(&data.join("truth.pgm"))?;
    let report = evaluate_class_map(&process.map, &truth)?;
    dataset::write_text(&out.join("eval.txt"), &report.to_text())?;
    Ok(RunAllSummary {
        report,
        site,
        process,
    })
}
