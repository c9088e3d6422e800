//! The `fcdtt` command line: synthetic data, speed fields, travel-time
//! estimates and forecasts.
//!
//! Exit codes: 0 success, 1 usage, 2 input or missing file, 3 insufficient
//! data, 4 internal error.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

use args::{Cli, Command};
use commands::Output;
use config::{pick, FileConfig};
use error::{CliError, Result};

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                1
            } else {
                let _ = write!(stdout, "{e}");
                0
            };
        }
    };
    match execute(cli).and_then(|out| commands::emit(&out, stdout)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error ({}): {e}", e.category().label());
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<Output> {
    let cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match pick(cli.threads, &cfg.threads) {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| dispatch(cli.command, &cfg))
        }
        None => dispatch(cli.command, &cfg),
    }
}

fn dispatch(command: Command, cfg: &FileConfig) -> Result<Output> {
    match command {
        Command::Synth(a) => commands::cmd_synth(a, cfg),
        Command::Field(a) => commands::cmd_field(a, cfg),
        Command::Estimate(a) => commands::cmd_estimate(a, cfg),
        Command::Forecast(a) => commands::cmd_forecast(a, cfg),
    }
}
