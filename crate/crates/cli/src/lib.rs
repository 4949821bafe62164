//! Config-driven runner behind the `hkflow` binary.
//!
//! Exit codes: 0 success, 1 malformed config or I/O failure, 2 validation or
//! parameter-domain failure, 3 falsified inequality, 4 solver abort.

pub mod commands;
pub mod config;

use std::path::Path;
use std::time::Instant;

use serde_json::{json, Value};
use thiserror::Error;

pub use commands::{execute, Outcome};
pub use config::{apply_override, load, Command, RunConfig};

#[derive(Debug, Error)]
pub enum Failure {
    #[error("config error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("inequality falsified: {0}")]
    Falsified(String),
    #[error("solver aborted: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) | Failure::Io(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Falsified(_) => 3,
            Failure::Solver(_) => 4,
        }
    }
}

impl From<hkflow_core::Error> for Failure {
    fn from(e: hkflow_core::Error) -> Self {
        use hkflow_core::Error as E;
        match e {
            E::SolverAbort { .. } => Failure::Solver(e.to_string()),
            E::Io(_) | E::Csv(_) | E::Json(_) => Failure::Io(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Loads the config, runs `command` on a pool of `jobs` workers (0 picks the
/// default) and writes `summary.json`. Returns the process exit code.
pub fn run(command: Command, config_path: &Path, overrides: &[String], jobs: usize) -> i32 {
    match run_inner(command, config_path, overrides, jobs) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("hkflow: {f}");
            f.exit_code()
        }
    }
}

fn run_inner(command: Command, config_path: &Path, overrides: &[String], jobs: usize) -> Result<(), Failure> {
    let (config, effective) = load(config_path, overrides)?;
    let out = config.output_dir()?;
    std::fs::create_dir_all(&out).map_err(|e| Failure::Io(format!("cannot create {}: {e}", out.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Config(format!("cannot build a pool of {jobs} workers: {e}")))?;

    let start = Instant::now();
    let result = pool.install(|| execute(command, &config, &out));
    let wall_clock = start.elapsed().as_secs_f64();

    let (reports, failure) = match result {
        Ok(Outcome { reports, failure }) => (reports, failure),
        Err(f) => (Value::Null, Some(f)),
    };
    let grid = json!({
        "domain_kind": config.grid.domain_kind,
        "n": config.grid.n,
    });
    let summary = json!({
        "command": command.as_str(),
        "config": effective,
        "grid": grid,
        "wall_clock_seconds": wall_clock,
        "exit_code": failure.as_ref().map_or(0, Failure::exit_code),
        "error": failure.as_ref().map(|f| f.to_string()),
        "reports": reports,
    });
    let text = serde_json::to_string_pretty(&summary)?;
    std::fs::write(out.join("summary.json"), text + "\n")?;
    failure.map_or(Ok(()), Err)
}
