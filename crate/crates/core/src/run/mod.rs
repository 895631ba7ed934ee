//! Batch front-end shared by the `headwave` binary and in-process callers.
//!
//! A run reads an INI configuration, executes one command and reports through
//! two writers: the summary goes to `out`, diagnostics to `err`. Every failure
//! maps to a stable exit code.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;

use thiserror::Error;

pub use commands::{check, forward, forward_fn, forward_grid, gauge, invert, reconstruct, verify, verify_rows, CheckRow, CheckStatus};
pub use config::{scene_hash, GaugeConfig, GaugeKind, MethodChoice, Mode, RunConfig, TaskConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ASSUMPTION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_HASH: i32 = 5;
pub const EXIT_DEGENERATE: i32 = 6;
pub const EXIT_GAUGE: i32 = 7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("config error at {key}: {message}")]
    Config { key: String, message: String },
    #[error("scene assumptions violated: {0}")]
    Assumption(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("scene hash mismatch: data {data:016x}, config {config:016x}")]
    HashMismatch { data: u64, config: u64 },
    #[error("degenerate inversion: {0}")]
    Degenerate(String),
    #[error("gauge check failed: {0}")]
    Gauge(String),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("{0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } | RunError::Io(_) => EXIT_CONFIG,
            RunError::Assumption(_) => EXIT_ASSUMPTION,
            RunError::Numerical(_) => EXIT_NUMERICAL,
            RunError::HashMismatch { .. } => EXIT_HASH,
            RunError::Degenerate(_) => EXIT_DEGENERATE,
            RunError::Gauge(_) => EXIT_GAUGE,
            RunError::Verify(_) => EXIT_VERIFY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Forward,
    Invert,
    Gauge,
    Verify,
    Check,
}

/// Flags that override or complement the configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub data: Option<PathBuf>,
    pub total_integral: Option<f64>,
    pub out: Option<PathBuf>,
    pub override_hash: bool,
}

/// Execute `command` and return its exit code. Errors are printed to `err`.
pub fn run(command: Command, config: &std::path::Path, opts: &RunOptions, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = RunConfig::load(config).and_then(|cfg| match command {
        Command::Forward => forward(&cfg, opts, out, err),
        Command::Invert => invert(&cfg, opts, out, err),
        Command::Gauge => gauge(&cfg, opts, out, err),
        Command::Verify => verify(&cfg, opts, out, err),
        Command::Check => check(&cfg, out),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
