//! `qps` — plan, time and simulate payload-transport missions.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qps_core::mission::trace::timed_table_csv;
use qps_core::mission::{
    parse_timed_table, synth_terrain, waypoint_table_csv, Mission, MissionConfig, MissionTrace,
    SynthParams,
};
use qps_core::{Error, MissionError, MissionPhase};

#[derive(Parser)]
#[command(name = "qps", version, about = "Quadcopter-payload mission planner and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a route and print its waypoint table.
    Plan(PlanArgs),
    /// Plan a route, time its segments and print waypoints with arrival times.
    Time(PlanArgs),
    /// Fly a timed waypoint table (or a freshly planned one) and report.
    Simulate(SimulateArgs),
    /// Run the full pipeline: plan, time, fly.
    Run(RunArgs),
    /// Generate a synthetic terrain grid.
    Terrain(TerrainArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Mission config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Write the table here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Outputs {
    /// Write the trace CSV here.
    #[arg(short, long)]
    trace: Option<PathBuf>,
    /// Write the summary JSON here instead of stdout.
    #[arg(short, long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(short, long)]
    config: PathBuf,
    /// Timed waypoint table as written by `qps time`; planned from the config if absent.
    #[arg(short, long)]
    waypoints: Option<PathBuf>,
    #[command(flatten)]
    outputs: Outputs,
}

#[derive(Args)]
struct RunArgs {
    #[arg(short, long)]
    config: PathBuf,
    #[command(flatten)]
    outputs: Outputs,
}

#[derive(Args)]
struct TerrainArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Map size along x and y, m.
    #[arg(long, num_args = 2, value_names = ["X", "Y"], default_values_t = [200.0, 200.0])]
    extent: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    cell: f64,
    /// Fraction of cells covered by buildings.
    #[arg(long, default_value_t = 0.1)]
    density: f64,
    #[arg(long, default_value_t = 5.0)]
    height_min: f64,
    #[arg(long, default_value_t = 20.0)]
    height_max: f64,
    #[arg(long, default_value_t = 0.0)]
    base: f64,
    #[arg(long, default_value_t = 0.5)]
    ground_amplitude: f64,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

/// Exit codes.
const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_UNSAFE: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoPath(_)
        | Error::NoFeasibleTime(_)
        | Error::Singularity(_)
        | Error::NumericalBlowup(_)
        | Error::InfeasibleThrust { .. } => EXIT_INFEASIBLE,
        Error::Parse { .. } | Error::Domain(_) | Error::Config(_) | Error::Io(_) => EXIT_USAGE,
    }
}

fn report(e: &MissionError) -> ExitCode {
    let line = serde_json::json!({
        "category": e.category(),
        "phase": e.phase.as_str(),
        "message": e.error.to_string(),
    });
    eprintln!("{line}");
    ExitCode::from(exit_code(&e.error))
}

fn config_phase(e: Error) -> MissionError {
    MissionError::new(MissionPhase::Config, e)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), MissionError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| config_phase(Error::Io(format!("{}: {e}", p.display())))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn prepare(config: &Path) -> Result<Mission, MissionError> {
    Mission::prepare(MissionConfig::load(config).map_err(config_phase)?)
}

fn finish(trace: &MissionTrace, outputs: &Outputs) -> Result<ExitCode, MissionError> {
    if let Some(p) = &outputs.trace {
        write_out(Some(p), &trace.to_csv())?;
    }
    let summary = trace.summary();
    write_out(outputs.summary.as_deref(), &(summary.to_json() + "\n"))?;
    Ok(if summary.is_safe() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_UNSAFE)
    })
}

fn execute(cmd: Command) -> Result<ExitCode, MissionError> {
    match cmd {
        Command::Plan(args) => {
            let route = prepare(&args.config)?.plan_route()?;
            write_out(args.out.as_deref(), &waypoint_table_csv(&route))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Time(args) => {
            let mission = prepare(&args.config)?;
            let traj = mission.plan_times(&mission.plan_route()?)?;
            write_out(args.out.as_deref(), &timed_table_csv(&traj))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate(args) => {
            let mission = prepare(&args.config)?;
            let traj = match &args.waypoints {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| {
                        config_phase(Error::Io(format!("{}: {e}", path.display())))
                    })?;
                    parse_timed_table(&text).map_err(config_phase)?
                }
                None => mission.plan_times(&mission.plan_route()?)?,
            };
            finish(&mission.simulate(&traj)?, &args.outputs)
        }
        Command::Run(args) => finish(&prepare(&args.config)?.run()?, &args.outputs),
        Command::Terrain(args) => {
            let params = SynthParams {
                extent: [args.extent[0], args.extent[1]],
                cell_size: args.cell,
                seed: args.seed,
                density: args.density,
                height_range: [args.height_min, args.height_max],
                base_height: args.base,
                ground_amplitude: args.ground_amplitude,
                ..SynthParams::default()
            };
            let map = synth_terrain(&params).map_err(config_phase)?;
            write_out(args.out.as_deref(), &map.to_grid_string())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => report(&e),
    }
}
