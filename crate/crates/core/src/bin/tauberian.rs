use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tauberian::experiments::{run, Experiment, ExperimentSpec, Preset};
use tauberian::Error;

#[derive(Parser)]
#[command(name = "tauberian", version, about = "Average versus discounted values: batch experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (means, kernel, counterexample, smooth, discrete, bridge, all).
    Run {
        name: String,
        #[arg(long, value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Integrator step.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Graph file for `discrete`: lines `id cost succ...`.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Sequence for `means`: square-wave, dyadic or constant.
        #[arg(long)]
        preset: Option<String>,
    },
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    eprintln!("usage: tauberian run <{}> [--t-grid ..] [--lambda-grid ..] [--n-grid ..] [--seed N] [--out DIR] [--step H] [--graph FILE] [--preset NAME]", Experiment::NAMES.join("|"));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let Command::Run { name, t_grid, lambda_grid, n_grid, seed, out, step, graph, preset } = cli.command;
    let name = match name.parse::<Experiment>() {
        Ok(n) => n,
        Err(e) => return usage_error(e),
    };
    let preset = match preset.map(|p| p.parse::<Preset>()).transpose() {
        Ok(p) => p,
        Err(e) => return usage_error(e),
    };
    let spec = ExperimentSpec { name, t_grid, lambda_grid, n_grid, seed, out, step, graph, preset };
    if let Err(e) = spec.validate() {
        return usage_error(e);
    }
    match run(&spec) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        // bad input files or parameters are usage errors; anything else is a failed run
        Err(e @ (Error::Parse { .. } | Error::Io(_) | Error::Domain(_))) => usage_error(e),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
