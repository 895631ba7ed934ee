//! `headwave` batch front end.
//!
//! Exit codes: 0 ok, 1 verification failed, 2 configuration or input error,
//! 3 scene assumption violated, 4 numerical failure, 5 scene hash mismatch,
//! 6 degenerate inversion denominator, 7 gauge residual above threshold.

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use headwave::run::{run, Command, RunOptions, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "headwave", version, about = "Head wave transform: forward sweeps, inversion, kernel constructions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sweep the forward transform over the configured grid and write a CSV.
    Forward(Common),
    /// Reconstruct the profile from a data CSV.
    Invert(Common),
    /// Build a kernel element and report its residuals.
    Gauge(Common),
    /// Run every applicable consistency check.
    Verify(Common),
    /// Validate the scene assumptions only.
    Check(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long = "total-integral", allow_negative_numbers = true)]
    total_integral: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "override-hash")]
    override_hash: bool,
}

/// HEADWAVE_THREADS caps the sweep pool; 0 or unset leaves rayon's default.
fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("HEADWAVE_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("HEADWAVE_THREADS must be a non-negative integer, got '{v}'"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let (command, c) = match cli.command {
        Cmd::Forward(c) => (Command::Forward, c),
        Cmd::Invert(c) => (Command::Invert, c),
        Cmd::Gauge(c) => (Command::Gauge, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Check(c) => (Command::Check, c),
    };
    let opts = RunOptions {
        data: c.data,
        total_integral: c.total_integral,
        out: c.out,
        override_hash: c.override_hash,
    };
    let code = run(command, &c.config, &opts, &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(code as u8)
}
