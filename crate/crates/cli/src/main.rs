//! `msrom`: full- and reduced-order runs, basis construction and benchmarks.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use msrom_core::Error;

use config::{ConfigError, RunArgs};

#[derive(Parser, Debug)]
#[command(name = "msrom", version, about = "Energy-preserving FOM/ROM solvers for multi-symplectic PDEs")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full-order model and write trajectory, snapshots and traces
    Fom(RunArgs),
    /// Build POD and DEIM bases from the snapshots of a `fom` run
    Reduce {
        #[command(flatten)]
        run: RunArgs,
        /// directory holding the snapshot files (defaults to --out)
        #[arg(long)]
        input: Option<std::path::PathBuf>,
    },
    /// Run P-ROM or PD-ROM from bases written by `reduce`
    Rom {
        #[command(flatten)]
        run: RunArgs,
        /// directory holding the basis files (defaults to --out)
        #[arg(long)]
        bases: Option<std::path::PathBuf>,
        /// p (Galerkin) or pd (Galerkin + DEIM)
        #[arg(long, default_value = "pd", value_parser = parse_variant)]
        variant: msrom_core::Variant,
    },
    /// FOM, P-ROM and PD-ROM end to end at the reference settings
    Bench(commands::BenchArgs),
}

fn parse_variant(s: &str) -> Result<msrom_core::Variant, String> {
    match s.parse() {
        Ok(msrom_core::Variant::Fom) => Err("rom runs take p or pd".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(format!("{e}")),
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigError),
    Missing(String),
    Core(Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Missing(_) => 3,
            CliError::Core(e) => match e {
                Error::UnknownModel(_) | Error::InvalidParameter(_) | Error::InvalidGrid(_) => 2,
                Error::BadMagic | Error::Truncated { .. } | Error::UnsupportedVersion(_) => 3,
                Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 3,
                Error::DimensionMismatch { .. } => 4,
                Error::StepFailed { .. } | Error::NotConverged { .. } => 5,
                _ => 1,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Missing(m) => f.write_str(m),
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Fom(run) => commands::fom(run),
        Command::Reduce { run, input } => commands::reduce(run, input),
        Command::Rom { run, bases, variant } => commands::rom(run, bases, variant),
        Command::Bench(args) => commands::bench(args),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
