use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nehari::cli::{run, Command, EXIT_CONFIG};

/// Nehari-manifold solvers and numerical audits for Φ-Laplacian Dirichlet problems.
#[derive(Parser)]
#[command(name = "nehari", version)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// Directory for output files, overriding `output_dir` in the configuration.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute a critical point in the configured mode; writes solution.csv and summary.json.
    Solve { config: PathBuf },
    /// Run the audit suite; writes checks.json.
    Check { config: PathBuf },
    /// Estimate the Poincaré constant; writes eigen.json and eigenfield.csv.
    Eigen { config: PathBuf },
    /// Solve all modes for each value of one parameter; writes sweep.csv.
    Sweep { config: PathBuf },
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("NEHARI_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| format!("NEHARI_THREADS must be a non-negative integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let (command, config) = match args.command {
        Cmd::Solve { config } => (Command::Solve, config),
        Cmd::Check { config } => (Command::Check, config),
        Cmd::Eigen { config } => (Command::Eigen, config),
        Cmd::Sweep { config } => (Command::Sweep, config),
    };
    ExitCode::from(run(command, &config, args.output_dir.as_deref()) as u8)
}
