//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver failure,
//! 3 ambiguous classification. `sweep` returns the largest code of its cells.

mod commands;
pub mod output;
pub mod scenario;
mod sweep;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::Error;
pub use scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("solver failure: {0}")]
    Solver(Error),
    #[error("{0}")]
    Ambiguous(Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Ambiguous(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::AmbiguousClassification { .. } => CliError::Ambiguous(e),
            Error::Config(m) | Error::Domain(m) | Error::Precondition(m) => CliError::Config(m),
            e => CliError::Solver(e),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Profile,
    Gmap,
    Simulate,
    Classify,
    Periodic,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Profile => "profile",
            Command::Gmap => "gmap",
            Command::Simulate => "simulate",
            Command::Classify => "classify",
            Command::Periodic => "periodic",
            Command::Sweep => "sweep",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(name, true).ok()
    }
}

#[derive(Debug, Parser)]
#[command(name = "necrosim", version, about = "Necrotic tumor growth under periodic nutrient supply")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    /// Scenario TOML file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Reserved; every solver here is deterministic.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Sub {
    /// Radial nutrient profiles for each (σ̄, R) pair.
    Profile,
    /// Growth functional on a (σ̄, R) grid.
    Gmap,
    /// Radius trajectory from R0.
    Simulate,
    /// Extinction or persistence verdict.
    Classify,
    /// Periodic orbit and optional convergence study.
    Periodic,
    /// Cartesian product over `run.sweep`, one directory per cell.
    Sweep,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Profile => Command::Profile,
            Sub::Gmap => Command::Gmap,
            Sub::Simulate => Command::Simulate,
            Sub::Classify => Command::Classify,
            Sub::Periodic => Command::Periodic,
            Sub::Sweep => Command::Sweep,
        }
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    let command = Command::from(cli.command);
    pool.install(|| match command {
        Command::Sweep => sweep::sweep(&text, &cli.out),
        c => run_command(c, &Scenario::from_toml(&text)?, &cli.out),
    })
}

/// Runs one non-sweep command for a parsed scenario.
pub fn run_command(command: Command, sc: &Scenario, out: &Path) -> Result<(), CliError> {
    match command {
        Command::Profile => commands::profile(sc, out),
        Command::Gmap => commands::gmap(sc, out),
        Command::Simulate => commands::simulate(sc, out),
        Command::Classify => commands::classify_cmd(sc, out),
        Command::Periodic => commands::periodic(sc, out),
        Command::Sweep => Err(CliError::Config("sweep cells cannot run sweep".into())),
    }
}
