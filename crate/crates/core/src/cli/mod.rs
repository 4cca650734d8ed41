//! Command-line front-end: `generate`, `run` and `report`.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};

pub use commands::{cmd_generate, cmd_report, cmd_run};
pub use config::{parse_config, stream_name, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "scm-stream", version, about = "Soft confusion matrix stream experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Experiment configuration file (key = value lines).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; overrides `jobs` in the config.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Replaces every stream seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the configured synthetic streams.
    Generate(CommonArgs),
    /// Evaluate every strategy and base classifier on the streams.
    Run(CommonArgs),
    /// Rank and compare the runs.
    Report(CommonArgs),
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::MissingInput(_) => EXIT_MISSING_INPUT,
        _ => EXIT_FAILURE,
    }
}

fn load(args: &CommonArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = args.seed {
        cfg.override_seed(seed);
    }
    if args.jobs.is_some() {
        cfg.jobs = args.jobs;
    }
    cfg.validate()?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| Error::Config("no output directory (use --out or `out =`)".into()))?;
    Ok((cfg, out))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let (cfg, out) = load(&args)?;
            let files = cmd_generate(&cfg, &out)?;
            println!("generated {} streams in {}", files.len(), out.display());
        }
        Command::Run(args) => {
            let (cfg, out) = load(&args)?;
            let rows = cmd_run(&cfg, &out)?;
            println!("completed {} runs in {}", rows.len(), out.display());
        }
        Command::Report(args) => {
            let (cfg, out) = load(&args)?;
            print!("{}", cmd_report(&cfg, &out)?);
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
