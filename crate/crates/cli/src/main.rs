//! Scenario-driven front end: run pipelines, validate configs, render
//! figures from finished runs.

mod pipeline;
mod plot;
mod scenario;

use anyhow::Result;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "setcert", version, about = "Robust set-attractivity certification for uncertain switched systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and write all artifacts to the run directory.
    Run {
        scenario: PathBuf,
        /// Output directory (default: runs/<scenario name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the simulation base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render a figure from a finished run directory.
    Plot {
        run_dir: PathBuf,
        #[arg(long, value_enum)]
        figure: plot::Figure,
    },
    /// Parse and validate a scenario file.
    Validate { scenario: PathBuf },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("SETCERT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run_command() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run_command() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out, seed } => {
            let out_dir = match out {
                Some(dir) => dir,
                None => pipeline::default_out_dir(&scenario)?,
            };
            let report = pipeline::run(&scenario, &out_dir, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.certified() {
                Ok(ExitCode::SUCCESS)
            } else {
                // Computed but not certified contractive.
                Ok(ExitCode::from(2))
            }
        }
        Command::Plot { run_dir, figure } => {
            let path = plot::plot(&run_dir, figure)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { scenario } => {
            scenario::Scenario::load(&scenario)?;
            println!("ok");
            Ok(ExitCode::SUCCESS)
        }
    }
}
