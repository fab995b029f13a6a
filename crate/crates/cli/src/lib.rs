//! Command-line runner for the dirlab experiments.
//!
//! Every run writes a JSON report, CSV tables and a `manifest.json` holding the
//! exact configuration, so `dirlab replay <manifest>` can check that the same
//! seed reproduces byte-identical tables.

pub mod config;
pub mod error;
pub mod replay;
pub mod runner;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ExperimentArgs, ExperimentConfig, ExperimentKind, MarketKind, OutputFormat};
pub use error::{CliError, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION};
pub use replay::{replay, ReplayOutcome};
pub use runner::{execute, run, run_into, RunArtifacts, RunManifest, RunOutcome};

pub const SEED_ENV: &str = "DIRLAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "dirlab", version, about = "Long-maturity yield and forward-rate experiments")]
pub struct Cli {
    /// Worker threads for path simulation (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// T (R_s - R_t) bounded above on a maturity grid.
    DirYields(ExperimentArgs),
    /// T (F_{s,s'} - F_{t,t'}) bounded above on a maturity grid.
    DirForwards(ExperimentArgs),
    /// T (F_{t,t'} - R_t) and the forward/yield identity.
    Equivalence(ExperimentArgs),
    /// Supermartingale checks of the declared deflator.
    DeflatorCheck(ExperimentArgs),
    /// Short-bond arbitrage scan and roll-over condition.
    Arbitrage(ExperimentArgs),
    /// Markov tail bound on deflated price ratios.
    TailBound(ExperimentArgs),
    /// Re-run a finished run from its manifest and compare outputs.
    Replay {
        manifest: PathBuf,
    },
}

impl Command {
    pub fn into_config(self) -> Option<ExperimentConfig> {
        let (kind, args) = match self {
            Command::DirYields(a) => (ExperimentKind::DirYields, a),
            Command::DirForwards(a) => (ExperimentKind::DirForwards, a),
            Command::Equivalence(a) => (ExperimentKind::Equivalence, a),
            Command::DeflatorCheck(a) => (ExperimentKind::DeflatorCheck, a),
            Command::Arbitrage(a) => (ExperimentKind::Arbitrage, a),
            Command::TailBound(a) => (ExperimentKind::TailBound, a),
            Command::Replay { .. } => return None,
        };
        Some(ExperimentConfig::new(kind, args))
    }
}

/// Parses experiment arguments (without the program name) into a config.
pub fn parse_config<I, T>(args: I) -> Result<ExperimentConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("dirlab")).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    cli.command
        .into_config()
        .ok_or_else(|| CliError::Usage("replay takes a manifest, not an experiment".into()))
}

fn apply_seed_override(config: &mut ExperimentConfig, env_seed: Option<&str>) -> Result<(), CliError> {
    if let Some(raw) = env_seed {
        config.args.seed = raw
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got {raw:?}")))?;
    }
    Ok(())
}

fn dispatch(command: Command, env_seed: Option<&str>) -> Result<i32, CliError> {
    match command {
        Command::Replay { manifest } => {
            let outcome = replay(&manifest)?;
            if outcome.mismatched.is_empty() {
                println!("replay identical: {}", manifest.display());
            } else {
                println!("replay differs in: {}", outcome.mismatched.join(", "));
            }
            Ok(outcome.exit_code)
        }
        other => {
            let mut config = other.into_config().expect("experiment subcommand");
            apply_seed_override(&mut config, env_seed)?;
            let outcome = run(&config)?;
            for check in &outcome.manifest.checks {
                println!("{} {}", if check.pass { "PASS" } else { "FAIL" }, check.name);
            }
            println!("wrote {}", outcome.out_dir.display());
            Ok(outcome.exit_code)
        }
    }
}

/// Full command-line entry point; returns the process exit status.
pub fn main_with<I, T>(args: I, env_seed: Option<&str>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, env_seed)),
            Err(e) => Err(CliError::Usage(format!("--jobs: {e}"))),
        },
        None => dispatch(cli.command, env_seed),
    };
    result.unwrap_or_else(|e| {
        eprintln!("dirlab: {e}");
        EXIT_USAGE
    })
}
