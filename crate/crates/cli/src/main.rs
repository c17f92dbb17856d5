//! `atc-ioc`: synthesize, ingest, plan, train and evaluate from the shell.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 every planner
//! query failed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "atc-ioc", version, about = "Lattice planning and inverse optimal control for airport arrivals")]
struct Cli {
    /// More log output; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory, created if missing.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Convert recorded traces into demonstrations.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Trace file with flight_id,t_unix_s,lat_deg,lon_deg,alt_m columns.
        #[arg(long)]
        traces: PathBuf,
    },
    /// Generate synthetic demonstrations under known costs.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Plan every demonstration's start and goal.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Demonstrations to plan, one start and goal each.
        #[arg(long)]
        demos: PathBuf,
        /// Routing cost: a cost field file or a ground-truth JSON file.
        /// Path length only when absent.
        #[arg(long)]
        field: Option<PathBuf>,
        /// Plan each scene in order with this separation cost.
        #[arg(long)]
        separation: Option<PathBuf>,
    },
    /// Learn the routing cost field.
    TrainRouting {
        #[command(flatten)]
        common: Common,
        /// Demonstrations to fit.
        #[arg(long)]
        demos: PathBuf,
        /// Starting field; the uniform default otherwise.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Learn the separation thresholds with a fixed routing cost.
    TrainSeparation {
        #[command(flatten)]
        common: Common,
        /// Demonstrations grouped into scenes.
        #[arg(long)]
        scenes: PathBuf,
        /// Routing cost: a cost field file or a ground-truth JSON file.
        #[arg(long)]
        routing: PathBuf,
        /// Starting thresholds; the configured separation cost otherwise.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Compare planned and demonstrated trajectories.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Demonstrations to compare against.
        #[arg(long)]
        demos: PathBuf,
        /// Learned cost field or ground-truth JSON file.
        #[arg(long)]
        field: PathBuf,
        /// Training trace to summarize.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Also evaluate the path-length-only planner.
        #[arg(long)]
        baseline: bool,
        /// Replan multi-arrival scenes with this separation cost and audit them.
        #[arg(long)]
        separation: Option<PathBuf>,
    },
    /// Write plot-ready series.
    Export {
        #[command(flatten)]
        common: Common,
        /// Training trace to turn into margin and timeout series.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Plans written by `plan` or `eval`.
        #[arg(long)]
        plans: Option<PathBuf>,
        #[arg(long)]
        demos: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Ingest { common, traces } => commands::ingest(&common, &traces),
        Command::Synth { common } => commands::synth(&common),
        Command::Plan {
            common,
            demos,
            field,
            separation,
        } => commands::plan(&common, &demos, field.as_deref(), separation.as_deref()),
        Command::TrainRouting { common, demos, init } => commands::train_routing(&common, &demos, init.as_deref()),
        Command::TrainSeparation {
            common,
            scenes,
            routing,
            init,
        } => commands::train_separation(&common, &scenes, &routing, init.as_deref()),
        Command::Eval {
            common,
            demos,
            field,
            trace,
            baseline,
            separation,
        } => commands::eval(&common, &demos, &field, trace.as_deref(), baseline, separation.as_deref()),
        Command::Export {
            common,
            trace,
            plans,
            demos,
        } => commands::export(&common, trace.as_deref(), plans.as_deref(), demos.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("atc-ioc: {f}");
            ExitCode::from(f.code())
        }
    }
}
