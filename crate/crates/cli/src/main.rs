use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use reachnet::{execute, Mode, RunConfig, Task};
use reachnet_core::affine::DisturbanceLag;
use reachnet_core::fixpoint::DEFAULT_TOLERANCE;

#[derive(Parser)]
#[command(name = "reachnet", version, about = "Distributed backward reachability for networked systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Lag {
    Paper,
    Standard,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write results to a directory.
    Run {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
        #[arg(long)]
        max_rounds: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Delay between a disturbance and its first effect on the states.
        #[arg(long, value_enum, default_value = "paper")]
        disturbance_lag: Lag,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let Command::Run {
        mode,
        task,
        spec,
        out,
        tol,
        max_rounds,
        seed,
        disturbance_lag,
    } = Cli::parse().command;
    let config = RunConfig {
        mode,
        task,
        spec,
        out,
        tolerance: tol,
        max_rounds,
        seed,
        lag: match disturbance_lag {
            Lag::Paper => DisturbanceLag::Paper,
            Lag::Standard => DisturbanceLag::Standard,
        },
    };
    ExitCode::from(execute(&config) as u8)
}
