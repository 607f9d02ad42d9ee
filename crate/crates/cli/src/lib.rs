//! `scalekernel` command-line front-end.
//!
//! `scalekernel <command> <config.toml> [--output PATH] [--manifest PATH]`
//! evaluates one problem description and writes a CSV table (stdout unless an
//! output path is configured) plus a JSON [`RunManifest`]. Exit status is 0 on
//! success, 1 on any error and 2 when `verify` finds |z| > 3.

pub mod commands;
pub mod config;
pub mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use thiserror::Error;

pub use commands::{execute, Command, Table};
pub use config::{parse_config, parse_str, Config, ConfigError};
pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;

/// Environment variable capping Monte Carlo threads (0 or unset: automatic).
pub const THREADS_ENV: &str = "SCALEKERNEL_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Compute(#[from] scalekernel::Error),
    #[error("cannot write {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{THREADS_ENV} must be a non-negative integer, got {0:?}")]
    Threads(String),
}

#[derive(Debug, Parser)]
#[command(name = "scalekernel", version, about = "Double barrier dividend valuation for one-dimensional diffusions")]
struct Args {
    /// value-curve | optimal-barrier | exit-prob | verify | simulate | scale-table
    #[arg(value_parser = parse_command)]
    command: Command,
    /// Problem description (TOML)
    config: PathBuf,
    /// CSV destination, overriding `output.path`
    #[arg(long)]
    output: Option<PathBuf>,
    /// Manifest destination, overriding `output.manifest`
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn parse_command(s: &str) -> Result<Command, String> {
    s.parse()
}

/// Everything a run produced, before it is written anywhere.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: Table,
    pub manifest: RunManifest,
}

/// Runs `command` on a parsed configuration.
pub fn run_config(command: Command, config: &Config) -> Result<RunOutput, CliError> {
    let started = Instant::now();
    let table = execute(command, config)?;
    let manifest = RunManifest {
        command: command.name().to_string(),
        config_digest: manifest::config_digest(config),
        versions: manifest::versions(),
        seed: command.is_stochastic().then_some(config.sim.seed),
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    Ok(RunOutput { table, manifest })
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| CliError::Threads(raw.clone()))?;
    if n > 0 {
        // a pool may already exist when embedded; the first one wins
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        file: path.display().to_string(),
        source,
    })
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match run_args(args) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VERIFY_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn run_args(args: Args) -> Result<bool, CliError> {
    configure_threads()?;
    let mut config = parse_config(&args.config)?;
    if let Some(out) = args.output {
        config.output = Some(out);
    }
    if let Some(m) = args.manifest {
        config.manifest = Some(m);
    }
    let out = run_config(args.command, &config)?;
    for w in &out.table.warnings {
        eprintln!("warning: {w}");
    }
    match &config.output {
        Some(path) => write_file(path, &out.table.csv)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(out.table.csv.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    file: "<stdout>".into(),
                    source,
                })?;
        }
    }
    let manifest = out.manifest.to_json() + "\n";
    match config.manifest.clone().or_else(|| config.output.as_deref().map(manifest_path)) {
        Some(path) => write_file(&path, &manifest)?,
        None => eprint!("{manifest}"),
    }
    if out.table.verification_failed {
        eprintln!("error: verification failed, |z| exceeds {}", commands::Z_LIMIT);
    }
    Ok(!out.table.verification_failed)
}
