//! crabforge command line: pulse synthesis, robustness searches, and
//! data export for the simulated two-transmon gate set.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crabforge::cli::commands;
use crabforge::cli::config::load_config;
use crabforge::error::Error;
use crabforge::gates::GateKind;
use crabforge::robustness::DisturbanceKind;

#[derive(Parser)]
#[command(
    name = "crabforge",
    version,
    about = "Synthesize and stress-test control pulses for a coupled two-transmon gate set"
)]
struct Cli {
    /// TOML configuration file; omitted keys keep their defaults
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for parallel runs (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize pulses for the configured gates and save solutions
    Optimize(OptimizeArgs),
    /// Find the tolerated additive-noise level of saved solutions
    RobustNoise(RobustArgs),
    /// Find the tolerated coefficient-distortion level of saved solutions
    RobustDistort(RobustArgs),
    /// Export sampled signals and per-channel spectra of one solution
    Emit(EmitArgs),
    /// Tabulate disturbed infidelity over a list of sigma values
    Sweep(SweepArgs),
    /// Summarize a directory of saved solutions
    Report(ReportArgs),
}

#[derive(Args)]
struct OptimizeArgs {
    /// Gate to synthesize; repeat for several (cnot, hadamard, phase, pi8)
    #[arg(long = "gate", value_name = "GATE")]
    gates: Vec<GateKind>,

    /// Independent runs per gate
    #[arg(long, value_name = "N")]
    runs: Option<usize>,

    /// Base seed; run i uses seed base + i
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Directory for solution files and summaries
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RobustArgs {
    /// Directory containing solution JSON files
    dir: PathBuf,

    /// Directory for tolerance CSV files (default: the solutions directory)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmitArgs {
    /// Solution JSON file
    solution: PathBuf,

    /// Directory for CSV files (default: next to the solution)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Solution JSON file
    solution: PathBuf,

    /// Disturbance kind: noise or distortion
    #[arg(long)]
    kind: DisturbanceKind,

    /// Comma-separated sigma values in rad/ns (default: a dB ladder)
    #[arg(long, value_delimiter = ',', value_name = "SIGMA,...")]
    sigmas: Option<Vec<f64>>,

    /// Realizations averaged per sigma
    #[arg(long, default_value_t = 10, value_name = "N")]
    realizations: usize,

    /// Directory for the sweep CSV (default: next to the solution)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory containing solution JSON files
    dir: PathBuf,
}

fn run(cli: Cli) -> crabforge::Result<()> {
    let mut config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Optimize(args) => {
            if !args.gates.is_empty() {
                config.gates = args.gates;
            }
            if let Some(runs) = args.runs {
                config.runs_per_gate = runs;
            }
            if let Some(seed) = args.seed {
                config.base_seed = seed;
            }
            if let Some(out) = args.out {
                config.output_dir = out;
            }
            commands::cmd_optimize(&config)
        }
        Command::RobustNoise(args) => {
            commands::cmd_robust(&config, DisturbanceKind::Noise, &args.dir, args.out.as_deref())
        }
        Command::RobustDistort(args) => commands::cmd_robust(
            &config,
            DisturbanceKind::Distortion,
            &args.dir,
            args.out.as_deref(),
        ),
        Command::Emit(args) => commands::cmd_emit(&args.solution, args.out.as_deref()),
        Command::Sweep(args) => commands::cmd_sweep(
            &config,
            &args.solution,
            args.kind,
            args.sigmas,
            args.realizations,
            args.out.as_deref(),
        ),
        Command::Report(args) => commands::cmd_report(&args.dir),
    }
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::Parse { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: failed to size the worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            let mut source = std::error::Error::source(&error);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(exit_code_for(&error))
        }
    }
}
