use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use safeland_cli::commands::{
    cmd_evaluate, cmd_process, cmd_run_all, cmd_select, cmd_simulate, site_text,
};
use safeland_cli::config::{Overrides, RunConfig};
use safeland_cli::{exit_code, EXIT_NO_SITE, EXIT_OK};
use safeland_core::geometry::Point3;
use safeland_core::selector::{annotate_map, DroneState};
use safeland_core::sim::{SceneSpec, TrajectorySpec};
use safeland_core::Result;

#[derive(Parser)]
#[command(
    name = "safeland",
    version,
    about = "Safe landing site mapping from depth and semantic labels"
)]
struct Cli {
    #[command(flatten)]
    params: Params,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Params {
    /// key=value run configuration; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// distance weight of the landing cost
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// clearance weight of the landing cost
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// map cell size in meters
    #[arg(long, global = true)]
    resolution: Option<f64>,
    /// landing patch side in meters
    #[arg(long, global = true)]
    patch_size: Option<f64>,
    /// steepest plane still counted as flat, degrees
    #[arg(long, global = true)]
    slope_max_deg: Option<f64>,
    /// largest point-to-plane distance of a safe point, meters
    #[arg(long, global = true)]
    rough_max: Option<f64>,
    /// voxel leaf size in meters
    #[arg(long, global = true)]
    leaf: Option<f64>,
    /// probability a cell needs to be Safe
    #[arg(long, global = true)]
    p_safe: Option<f64>,
    /// RNG seed for simulation and plane fitting
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads, 0 for all cores
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// fraction of label pixels replaced by a random class when simulating
    #[arg(long, global = true)]
    label_corruption: Option<f64>,
}

impl Params {
    fn resolve(&self) -> Result<RunConfig> {
        let o = Overrides {
            alpha: self.alpha,
            beta: self.beta,
            resolution: self.resolution,
            patch_size: self.patch_size,
            slope_max_deg: self.slope_max_deg,
            rough_max: self.rough_max,
            leaf: self.leaf,
            p_safe: self.p_safe,
            seed: self.seed,
            threads: self.threads,
            label_corruption: self.label_corruption,
        };
        RunConfig::resolve(self.config.as_deref(), &o)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the safety map of a dataset
    Process {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Choose a landing site on a map
    Select {
        #[arg(long)]
        map: PathBuf,
        /// drone position x y z in meters
        #[arg(long, num_args = 3, allow_negative_numbers = true, value_names = ["X", "Y", "Z"])]
        drone: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        yaw: f64,
        /// write the map with the chosen cell marked
        #[arg(long)]
        annotate: Option<PathBuf>,
    },
    /// Score a map against ground truth
    Evaluate {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// simulate, process, select and evaluate in one go
    RunAll {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<i32> {
    let cfg = cli.params.resolve()?;
    match cli.command {
        Command::Simulate {
            scene,
            trajectory,
            out,
        } => {
            let s = cmd_simulate(
                &SceneSpec::load(scene)?,
                &TrajectorySpec::load(trajectory)?,
                &cfg,
                &out,
            )?;
            println!("frames={}", s.frames);
            Ok(EXIT_OK)
        }
        Command::Process { dataset, out } => {
            let s = cmd_process(&dataset, &cfg, &out)?;
            println!(
                "frames={} width={} height={}",
                s.timings.len(),
                s.map.width,
                s.map.height
            );
            Ok(EXIT_OK)
        }
        Command::Select {
            map,
            drone,
            yaw,
            annotate,
        } => {
            let d = DroneState::new(Point3::new(drone[0], drone[1], drone[2]), yaw)?;
            let (m, site) = cmd_select(&map, &d, &cfg)?;
            print!("{}", site_text(site.as_ref()));
            match site {
                Some(s) => {
                    if let Some(path) = annotate {
                        annotate_map(&m, &s).write(path)?;
                    }
                    Ok(EXIT_OK)
                }
                None => Ok(EXIT_NO_SITE),
            }
        }
        Command::Evaluate { map, truth } => {
            print!("{}", cmd_evaluate(&map, &truth)?.to_text());
            Ok(EXIT_OK)
        }
        Command::RunAll {
            scene,
            trajectory,
            out,
        } => {
            let s = cmd_run_all(
                &SceneSpec::load(scene)?,
                &TrajectorySpec::load(trajectory)?,
                &cfg,
                &out,
            )?;
            print!("{}", site_text(s.site.as_ref()));
            print!("{}", s.report.to_text());
            Ok(if s.site.is_some() {
                EXIT_OK
            } else {
                EXIT_NO_SITE
            })
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
