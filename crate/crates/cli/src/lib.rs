//! `scint` command-line driver: TOML run configs in, stamped CSV and binary
//! artifacts out.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use scint_core::io::Stamp;

pub use config::{load, Loaded, RunConfig};
pub use error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "scint",
    version,
    about = "Turbulence kernels, moment evolution and Monte-Carlo checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build Φ₁ and Φ₀ and check the contraction identity.
    Kernels(RunArgs),
    /// Evolve a thermal state through the medium.
    Evolve(RunArgs),
    /// Compare a Monte-Carlo ensemble against the moment evolution.
    Validate(RunArgs),
    /// Report the wave-vector dependence of the loss model.
    Losscheck(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides OUTPUT_DIR and the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    /// Replaces `montecarlo.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    pub fn args(&self) -> &RunArgs {
        match self {
            Self::Kernels(a) | Self::Evolve(a) | Self::Validate(a) | Self::Losscheck(a) => a,
        }
    }
}

/// `--out`, then `OUTPUT_DIR`, then the config (relative to the config file).
pub fn output_dir(args: &RunArgs, run: &Loaded, env: Option<PathBuf>) -> PathBuf {
    if let Some(d) = &args.out {
        return d.clone();
    }
    if let Some(d) = env.filter(|d| !d.as_os_str().is_empty()) {
        return d;
    }
    let d = &run.config.output.directory;
    if d.is_absolute() {
        d.clone()
    } else {
        run.base_dir.join(d)
    }
}

/// Runs one command and returns its summary lines.
pub fn run(cmd: &Command) -> Result<Vec<String>, CliError> {
    let args = cmd.args();
    let loaded = load(&args.config, args.seed)?;
    let dir = output_dir(
        args,
        &loaded,
        std::env::var_os("OUTPUT_DIR").map(PathBuf::from),
    );
    let out = commands::Output::create(dir, Stamp::new(VERSION, loaded.hash.clone()))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.workers {
        pool = pool.num_threads(n as usize);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    pool.install(|| match cmd {
        Command::Kernels(_) => commands::kernels(&loaded, &out),
        Command::Evolve(_) => commands::evolve(&loaded, &out),
        Command::Validate(_) => commands::validate(&loaded, &out),
        Command::Losscheck(_) => commands::losscheck(&loaded, &out),
    })
}
