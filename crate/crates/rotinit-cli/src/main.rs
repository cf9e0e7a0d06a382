//! `rotinit` — synthesize datasets, run the initializer, refine, benchmark.
//!
//! Exit code 0 on success; on failure a machine-readable JSON object is
//! printed to stderr and the exit code is nonzero. A solve that is honestly
//! *detected* as failed is still a successful run (inspect `success` in the
//! emitted report).

use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use rotinit::manifold;
use rotinit::refiner::{records_to_csv, run_sequence, RefinerConfig, SequenceConfig};
use rotinit::sim::{generate, Dataset, ScenarioConfig};
use rotinit::solver::{solve, CalibState, SolveReport, SolverConfig};
use rotinit::window::{assemble_window, WindowConfig};

use rotinit_cli::config::{
    experiment_from_file, scenario_from_file, solver_from_file, ExperimentSpec,
};
use rotinit_cli::report::{parse_records_csv, write_reports};
use rotinit_cli::sweep::run_sweep;

#[derive(Parser)]
#[command(
    name = "rotinit",
    version,
    about = "Rotation-first visual-inertial initialization toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Simulate(SimulateArgs),
    /// Solve gyroscope bias + extrinsic rotation on one window.
    Init(InitArgs),
    /// Run the sliding-window refinement chain and emit per-window rows.
    Refine(RefineArgs),
    /// Run a benchmark sweep from an experiment spec.
    Sweep(SweepArgs),
    /// Re-aggregate an existing records.csv into summary reports.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// Scenario config file (key = value); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    prefix: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    pixel_noise: Option<f64>,
    #[arg(long)]
    excitation: Option<f64>,
    #[arg(long)]
    mixed_excitation: Option<bool>,
    /// True gyro bias "bx,by,bz" (rad/s).
    #[arg(long)]
    bias: Option<String>,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Solver config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    window_size: usize,
    /// First keyframe of the window.
    #[arg(long, default_value_t = 0)]
    start: usize,
    /// Extrinsic deformation applied to the calibrated rotation before
    /// solving (degrees, seeded random axis). Defaults to the dataset's
    /// recorded offset.
    #[arg(long)]
    offset_deg: Option<f64>,
    #[arg(long, default_value_t = 0)]
    offset_seed: u64,
    #[arg(long)]
    mode: Option<String>,
    /// Output JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    window_size: usize,
    #[arg(long, default_value_t = 0)]
    start: usize,
    #[arg(long)]
    offset_deg: Option<f64>,
    #[arg(long, default_value_t = 0)]
    offset_seed: u64,
    /// Per-window CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Final-belief hand-off package (JSON).
    #[arg(long)]
    handoff: Option<PathBuf>,
    /// Disable the prior chain (fresh solve per window).
    #[arg(long, default_value_t = false)]
    no_prior: bool,
    /// Parallax hand-off threshold, degrees.
    #[arg(long)]
    parallax_stop_deg: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment spec file.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory (records.csv, summary.json, timing.csv).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// records.csv produced by `sweep`.
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_vec3(text: &str) -> Result<Vector3<f64>> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("cannot parse '{text}' as bx,by,bz"))?;
    if parts.len() != 3 {
        return Err(anyhow!(
            "expected 3 comma-separated values, got {}",
            parts.len()
        ));
    }
    Ok(Vector3::new(parts[0], parts[1], parts[2]))
}

fn seeded_axis(seed: u64) -> Vector3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v = Vector3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn load_dataset(path: &std::path::Path) -> Result<Dataset> {
    rotinit::dataset::ingest(path).with_context(|| format!("ingest {}", path.display()))
}

fn initial_state(dataset: &Dataset, offset_deg: Option<f64>, offset_seed: u64) -> CalibState {
    let deg = offset_deg.unwrap_or(dataset.extrinsic_offset_deg);
    let extrinsic = if deg != 0.0 {
        let axis = seeded_axis(offset_seed ^ dataset.seed.rotate_left(17));
        manifold::boxplus(&dataset.extrinsic, &(axis * deg.to_radians()))
    } else {
        dataset.extrinsic
    };
    CalibState::new(Vector3::zeros(), extrinsic)
}

fn report_to_json(report: &SolveReport, dataset: &Dataset) -> serde_json::Value {
    let m = report.state.extrinsic.matrix();
    let extrinsic: Vec<f64> = (0..3)
        .flat_map(|r| (0..3).map(move |c| m[(r, c)]))
        .collect();
    let covariance = report.covariance.map(|cov| {
        (0..6)
            .map(|r| (0..6).map(|c| cov[(r, c)]).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    });
    let truth_error = dataset.truth.as_ref().map(|t| {
        json!({
            "extrinsic_error_deg": report.state.extrinsic.angle_to(&t.extrinsic).to_degrees(),
            "bias_error_rad_s": (report.state.gyro_bias - t.bias[0]).norm(),
        })
    });
    json!({
        "schema_version": 1,
        "success": report.success,
        "converged": report.converged,
        "gyro_bias": [report.state.gyro_bias.x, report.state.gyro_bias.y, report.state.gyro_bias.z],
        "extrinsic_rotation": extrinsic,
        "covariance": covariance,
        "pass_rate": report.pass_rate,
        "fisher_condition": report.fisher_condition,
        "loops_run": report.loops_run,
        "loop_costs": report.loop_costs,
        "lm_iterations": report.lm_iterations,
        "timing_ms": {
            "total": report.timing.total_ms,
            "reintegration": report.timing.reintegration_ms,
            "weighting": report.timing.weighting_ms,
            "lm": report.timing.lm_ms,
        },
        "message": report.message,
        "truth_error": truth_error,
    })
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => {
            let mut scenario = match &args.config {
                Some(path) => scenario_from_file(path)?,
                None => ScenarioConfig::default(),
            };
            if let Some(v) = args.seed {
                scenario.seed = v;
            }
            if let Some(v) = args.duration {
                scenario.duration = v;
            }
            if let Some(v) = args.prefix {
                scenario.pure_rotation_prefix = v;
            }
            if let Some(v) = args.points {
                scenario.n_points = v;
            }
            if let Some(v) = args.pixel_noise {
                scenario.pixel_noise = v;
            }
            if let Some(v) = args.excitation {
                scenario.excitation = v;
            }
            if let Some(v) = args.mixed_excitation {
                scenario.mixed_excitation = v;
            }
            if let Some(text) = &args.bias {
                scenario.gyro_bias = parse_vec3(text)?;
            }
            let dataset = generate(&scenario)?;
            rotinit::dataset::export(&dataset, &args.out)?;
            println!(
                "wrote {} ({} imu samples, {} keyframes)",
                args.out.display(),
                dataset.imu.len(),
                dataset.frames.len()
            );
            Ok(())
        }
        Command::Init(args) => {
            let dataset = load_dataset(&args.dataset)?;
            let mut solver_config = match &args.config {
                Some(path) => solver_from_file(path)?,
                None => SolverConfig::default(),
            };
            if let Some(mode) = &args.mode {
                solver_config.mode = mode.parse().map_err(|e: String| anyhow!(e))?;
            }
            let mut wc = WindowConfig::new(args.start, args.window_size);
            wc.covisibility_min = solver_config.covisibility_min;
            let mut window = assemble_window(&dataset, &wc)?;
            let init = initial_state(&dataset, args.offset_deg, args.offset_seed);
            let report = solve(&mut window, init, &solver_config);
            let value = report_to_json(&report, &dataset);
            let text = serde_json::to_string_pretty(&value)?;
            match &args.out {
                Some(path) => {
                    std::fs::write(path, &text).with_context(|| path.display().to_string())?;
                    println!(
                        "success = {} (pass rate {:.3}); wrote {}",
                        report.success,
                        report.pass_rate,
                        path.display()
                    );
                }
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::Refine(args) => {
            let dataset = load_dataset(&args.dataset)?;
            let solver_config = match &args.config {
                Some(path) => solver_from_file(path)?,
                None => SolverConfig::default(),
            };
            let mut wc = WindowConfig::new(args.start, args.window_size);
            wc.covisibility_min = solver_config.covisibility_min;
            let mut window = assemble_window(&dataset, &wc)?;
            let init_state = initial_state(&dataset, args.offset_deg, args.offset_seed);
            let report = solve(&mut window, init_state, &solver_config);
            if !report.success {
                return Err(anyhow!(
                    "initial solve failed (pass rate {:.3}): {}",
                    report.pass_rate,
                    report.message
                ));
            }
            let mut refiner = RefinerConfig {
                use_prior: !args.no_prior,
                ..Default::default()
            };
            if let Some(v) = args.parallax_stop_deg {
                refiner.parallax_stop_deg = v;
            }
            let seq = SequenceConfig {
                window_size: args.window_size,
                covisibility_min: solver_config.covisibility_min,
                pixel_sigma: None,
                solver: solver_config,
                refiner,
            };
            let records = run_sequence(&dataset, args.start, &report, &seq)?;
            std::fs::write(&args.out, records_to_csv(&records))
                .with_context(|| args.out.display().to_string())?;
            if let Some(path) = &args.handoff {
                let last = records.last();
                let belief = last.map(|r| &r.belief);
                let value = match belief {
                    Some(b) => {
                        let m = b.state.extrinsic.matrix();
                        let extrinsic: Vec<f64> = (0..3)
                            .flat_map(|r| (0..3).map(move |c| m[(r, c)]))
                            .collect();
                        json!({
                            "schema_version": 1,
                            "gyro_bias": [b.state.gyro_bias.x, b.state.gyro_bias.y, b.state.gyro_bias.z],
                            "extrinsic_rotation": extrinsic,
                            "covariance": (0..6).map(|r| (0..6).map(|c| b.covariance[(r, c)]).collect::<Vec<_>>()).collect::<Vec<_>>(),
                            "windows": records.len(),
                            "stopped_on_parallax": records.last().map(|r| r.stopped).unwrap_or(false),
                        })
                    }
                    None => json!({"schema_version": 1, "windows": 0}),
                };
                std::fs::write(path, serde_json::to_string_pretty(&value)?)
                    .with_context(|| path.display().to_string())?;
            }
            println!("wrote {} ({} windows)", args.out.display(), records.len());
            Ok(())
        }
        Command::Sweep(args) => {
            let mut spec: ExperimentSpec = experiment_from_file(&args.spec)?;
            if let Some(v) = args.seed {
                spec.seed = v;
                spec.scenario.seed = v;
            }
            if let Some(v) = args.segments {
                spec.segments = v;
            }
            if let Some(v) = args.repetitions {
                spec.repetitions = v.max(1);
            }
            let result = run_sweep(&spec)?;
            write_reports(&result, &args.out)?;
            println!(
                "wrote {} ({} records over {} segments, {} filtered)",
                args.out.display(),
                result.records.len(),
                result.used_segments.len(),
                result.filtered_segments
            );
            Ok(())
        }
        Command::Report(args) => {
            let text = std::fs::read_to_string(&args.records)
                .with_context(|| args.records.display().to_string())?;
            let result = parse_records_csv(&text).map_err(|e| anyhow!(e))?;
            write_reports(&result, &args.out)?;
            println!(
                "wrote {} ({} records)",
                args.out.display(),
                result.records.len()
            );
            Ok(())
        }
    }
}

fn main() {
    if let Err(err) = run() {
        let payload = json!({
            "error": err.to_string(),
            "context": err.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
        });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}
