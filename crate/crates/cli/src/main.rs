use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use terramcl::config::{parse_config, RunConfig};
use terramcl::eval::{format_summary, read_metrics_csv, replay, write_metrics_csv, ReplayOutput, Summary, SUMMARY_HEADER};
use terramcl::geom::Pose6D;
use terramcl::log::{format_log, parse_log, records_from_run};
use terramcl::sim::{generate_world, simulate_run, TrajectorySpec, WorldSpec};
use terramcl::worldmap::{build_gridmap, build_octree, read_bundle_file, write_bundle_file, GridParams, PointCloud};

mod plot;

#[derive(Parser)]
#[command(name = "terramcl", version, about = "Monte Carlo localization on non-planar terrain")]
struct Cli {
    /// RNG seed for simulation and filtering.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// key=value configuration file (filter parameters and sensors).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print progress details to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an octree + elevation grid bundle from an ASCII point cloud.
    BuildMap(BuildMapArgs),
    /// Generate a synthetic world and drive a trajectory through it.
    Simulate(SimulateArgs),
    /// Replay a sensor log through the filter and write per-step metrics.
    Localize(LocalizeArgs),
    /// Summarize and plot one or more metrics files.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct BuildMapArgs {
    /// Point cloud, one "x y z" per line.
    #[arg(long)]
    cloud: PathBuf,
    /// Voxel and cell size, meters.
    #[arg(long, default_value_t = 0.1)]
    resolution: f64,
    /// Largest ground step the robot can climb, meters.
    #[arg(long, default_value_t = 0.15)]
    step_threshold: f64,
    /// Clearance the robot needs above the ground, meters.
    #[arg(long, default_value_t = 0.8)]
    robot_height: f64,
    /// Pose on traversable ground the flood fill starts from: "x y z roll pitch yaw".
    #[arg(long, allow_hyphen_values = true)]
    seed_pose: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// World description (TOML).
    #[arg(long)]
    world: PathBuf,
    /// Trajectory description (TOML).
    #[arg(long)]
    trajectory: PathBuf,
    /// Map resolution used for ray casting, meters.
    #[arg(long, default_value_t = 0.1)]
    resolution: f64,
    /// Output sensor log.
    #[arg(long)]
    out: PathBuf,
    /// Also write the generated point cloud here.
    #[arg(long)]
    cloud_out: Option<PathBuf>,
}

#[derive(Args)]
struct LocalizeArgs {
    /// Map bundle written by build-map.
    #[arg(long)]
    map: PathBuf,
    /// Sensor log.
    #[arg(long)]
    log: PathBuf,
    /// Output metrics CSV.
    #[arg(long)]
    out: PathBuf,
    /// Output CSV of estimate-vs-checkpoint distances.
    #[arg(long)]
    checkpoints: Option<PathBuf>,
    /// Record wall-clock phase timings (makes the output non-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Metrics CSV files written by localize.
    #[arg(required = true)]
    metrics: Vec<PathBuf>,
    /// Checkpoint CSV files written by localize.
    #[arg(long, num_args = 1..)]
    checkpoints: Vec<PathBuf>,
    /// Directory for summary.csv, checkpoints.csv and plots.
    #[arg(long)]
    out_dir: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            parse_config(&text).with_context(|| format!("in {}", p.display()))
        }
    }
}

fn build_map(cli: &Cli, args: &BuildMapArgs) -> Result<()> {
    let seed: Pose6D = args.seed_pose.parse().context("--seed-pose needs six numbers")?;
    let cloud = PointCloud::read_ascii(&args.cloud).with_context(|| format!("reading {}", args.cloud.display()))?;
    let octree = build_octree(&cloud, args.resolution)?;
    let params = GridParams {
        step_threshold: args.step_threshold,
        robot_height: args.robot_height,
    };
    let grid = build_gridmap(&octree, seed, params)?;
    write_bundle_file(&args.out, &octree, &grid).with_context(|| format!("writing {}", args.out.display()))?;
    let (w, h) = grid.dims();
    let count = |c| grid.occupancy_layer().iter().filter(|&&o| o == c).count();
    use terramcl::worldmap::CellOccupancy::*;
    println!("points   : {}", cloud.len());
    println!("voxels   : {}", octree.voxel_count());
    println!("cells    : {} ({w} x {h})", w * h);
    println!("free     : {}", count(Free));
    println!("occupied : {}", count(Occupied));
    println!("unknown  : {}", count(Unknown));
    if cli.verbose {
        eprintln!("wrote {}", args.out.display());
    }
    Ok(())
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    if config.sensors.is_empty() {
        bail!("the config declares no sensors (sensor.<id>.* keys)");
    }
    let world_text = fs::read_to_string(&args.world).with_context(|| format!("reading {}", args.world.display()))?;
    let world = WorldSpec::from_toml(&world_text).with_context(|| format!("in {}", args.world.display()))?;
    let traj_text = fs::read_to_string(&args.trajectory).with_context(|| format!("reading {}", args.trajectory.display()))?;
    let traj = TrajectorySpec::from_toml(&traj_text).with_context(|| format!("in {}", args.trajectory.display()))?;

    let cloud = generate_world(&world)?;
    let octree = build_octree(&cloud, args.resolution)?;
    let start = traj.waypoints[0];
    let grid = build_gridmap(&octree, Pose6D::new(start.x, start.y, 0.0, 0.0, 0.0, start.yaw), GridParams::default())?;
    let run = simulate_run(&octree, &grid, &traj, &config.sensors, config.sim_odom_noise, cli.seed)?;
    fs::write(&args.out, format_log(&records_from_run(&run))).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(p) = &args.cloud_out {
        fs::write(p, cloud.to_ascii()).with_context(|| format!("writing {}", p.display()))?;
    }
    println!("ticks    : {}", run.ticks.len());
    println!("sensors  : {}", config.sensors.len());
    println!("points   : {}", cloud.len());
    if cli.verbose {
        eprintln!("wrote {}", args.out.display());
    }
    Ok(())
}

fn localize(cli: &Cli, args: &LocalizeArgs) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    let bundle = read_bundle_file(&args.map).with_context(|| format!("reading {}", args.map.display()))?;
    let text = fs::read_to_string(&args.log).with_context(|| format!("reading {}", args.log.display()))?;
    let records = parse_log(&text).with_context(|| format!("in {}", args.log.display()))?;
    if cli.verbose {
        eprintln!("{} log records, {} sensors configured", records.len(), config.sensors.len());
    }
    let out = replay(&records, &bundle.octree, &bundle.grid, &config, cli.seed, args.timings)?;
    let file = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_metrics_csv(std::io::BufWriter::new(file), &out)?;
    if let Some(p) = &args.checkpoints {
        fs::write(p, checkpoints_csv(&[(p.as_path(), &out)])).with_context(|| format!("writing {}", p.display()))?;
    }
    print!("{}", format_summary(&Summary::from_rows(&out.rows)));
    if !out.checkpoints.is_empty() {
        let mean = out.checkpoints.iter().map(|c| c.distance).sum::<f64>() / out.checkpoints.len() as f64;
        println!("checkpoints      : {} mean distance {mean:.6} m", out.checkpoints.len());
    }
    Ok(())
}

fn checkpoints_csv(runs: &[(&Path, &ReplayOutput)]) -> String {
    let mut s = String::from("run,t,checkpoint_x,checkpoint_y,checkpoint_z,est_x,est_y,est_z,distance\n");
    for (name, out) in runs {
        let name = run_name(name);
        for c in &out.checkpoints {
            s.push_str(&format!(
                "{name},{},{},{},{},{},{},{},{}\n",
                c.t, c.checkpoint.x, c.checkpoint.y, c.checkpoint.z, c.estimate.x, c.estimate.y, c.estimate.z, c.distance
            ));
        }
    }
    s
}

fn run_name(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}

/// Reads a checkpoint CSV back; only the distance column is needed for
/// the summary.
fn read_checkpoints(path: &Path) -> Result<Vec<(String, f64, f64)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let parsed = (f.len() == 9)
            .then(|| Some((f[0].to_string(), f[1].parse().ok()?, f[8].parse().ok()?)))
            .flatten();
        match parsed {
            Some(r) => rows.push(r),
            None => bail!("{} line {}: malformed checkpoint row", path.display(), i + 1),
        }
    }
    Ok(rows)
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let mut runs = Vec::new();
    for path in &args.metrics {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let out = read_metrics_csv(std::io::BufReader::new(file)).with_context(|| format!("in {}", path.display()))?;
        runs.push((run_name(path), out));
    }
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;

    let summaries: Vec<Summary> = runs.iter().map(|(_, o)| Summary::from_rows(&o.rows)).collect();
    let mut table = SUMMARY_HEADER.join(",") + "\n";
    for ((name, _), s) in runs.iter().zip(&summaries) {
        table.push_str(&format!("{name},{}\n", s.fields().join(",")));
    }
    let all = Summary::combine(&summaries);
    table.push_str(&format!("all,{}\n", all.fields().join(",")));
    fs::write(args.out_dir.join("summary.csv"), &table)?;

    if !args.checkpoints.is_empty() {
        let mut cp = String::from("run,t,distance\n");
        let mut distances = Vec::new();
        for p in &args.checkpoints {
            for (run, t, d) in read_checkpoints(p)? {
                cp.push_str(&format!("{run},{t},{d}\n"));
                distances.push(d);
            }
        }
        fs::write(args.out_dir.join("checkpoints.csv"), cp)?;
        if !distances.is_empty() {
            let mean = distances.iter().sum::<f64>() / distances.len() as f64;
            let max = distances.iter().cloned().fold(0.0, f64::max);
            println!("checkpoints: {} mean {mean:.6} m max {max:.6} m", distances.len());
        }
    }

    let named: Vec<(&str, &ReplayOutput)> = runs.iter().map(|(n, o)| (n.as_str(), o)).collect();
    plot::write_all(&args.out_dir, &named)?;
    if runs.len() == 1 {
        print!("{}", format_summary(&summaries[0]));
    } else {
        for ((name, _), s) in runs.iter().zip(&summaries) {
            println!("[{name}]");
            print!("{}", format_summary(s));
        }
        println!("[all]");
        print!("{}", format_summary(&all));
    }
    if cli.verbose {
        eprintln!("wrote {}", args.out_dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::BuildMap(a) => build_map(&cli, a),
        Command::Simulate(a) => simulate(&cli, a),
        Command::Localize(a) => localize(&cli, a),
        Command::Evaluate(a) => evaluate(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
