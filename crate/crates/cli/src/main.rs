use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use colombeau_cli::config::{Experiment, ExperimentConfig};
use colombeau_cli::{resolve, run, Overrides};

/// Runs one experiment and writes its CSVs, manifest and summary.
#[derive(Debug, Parser)]
#[command(name = "colombeau", version)]
struct Args {
    experiment: Experiment,
    /// TOML config; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of epsilon samples.
    #[arg(long)]
    grid_k: Option<usize>,
    #[arg(long)]
    tail_window: Option<usize>,
    #[arg(long)]
    m_inv: Option<f64>,
    #[arg(long)]
    m_max: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let base = match &args.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    let overrides = Overrides {
        out: args.out,
        seed: args.seed,
        grid_k: args.grid_k,
        tail_window: args.tail_window,
        m_inv: args.m_inv,
        m_max: args.m_max,
        cfl: args.cfl,
    };
    let cfg = match resolve(args.experiment, base, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            if !args.quiet {
                for c in &outcome.checks {
                    println!("{c}");
                }
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
