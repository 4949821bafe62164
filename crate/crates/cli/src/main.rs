use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hkflow_cli::{run, Command};

/// Numerical laboratory for Hellinger-Kantorovich gradient flows.
#[derive(Debug, Parser)]
#[command(name = "hkflow", version)]
struct Cli {
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a config entry, e.g. `--set grid.n=256`.
    #[arg(long = "set", value_name = "KEY.PATH=VALUE")]
    set: Vec<String>,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(run(cli.command, &cli.config, &cli.set, cli.jobs) as u8)
}
