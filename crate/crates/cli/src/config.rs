use std::path::PathBuf;

use clap::{Args, ValueEnum};
use dirlab_core::MaturityGrid;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DirYields,
    DirForwards,
    Equivalence,
    DeflatorCheck,
    Arbitrage,
    TailBound,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::DirYields => "dir-yields",
            Self::DirForwards => "dir-forwards",
            Self::Equivalence => "equivalence",
            Self::DeflatorCheck => "deflator-check",
            Self::Arbitrage => "arbitrage",
            Self::TailBound => "tail-bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MarketKind {
    Vasicek,
    DirViolation,
    MinExp,
    ExpNegTSquared,
    ExpTSquared,
    Flat,
}

impl MarketKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Vasicek => "vasicek",
            Self::DirViolation => "dir-violation",
            Self::MinExp => "min-exp",
            Self::ExpNegTSquared => "exp-neg-t-squared",
            Self::ExpTSquared => "exp-t-squared",
            Self::Flat => "flat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn name(self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::Both => "both",
        }
    }

    pub fn json(self) -> bool {
        self != Self::Csv
    }

    pub fn csv(self) -> bool {
        self != Self::Json
    }
}

pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_STEP: f64 = 1.0 / 64.0;
pub const DEFAULT_OUT: &str = "dirlab-out";

/// Everything a run depends on; the manifest stores it verbatim for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_enum)]
    pub market: MarketKind,
    /// Initial short rate (vasicek).
    #[arg(long, allow_hyphen_values = true)]
    pub r0: Option<f64>,
    /// Long-run mean of the short rate (vasicek).
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Constant short rate (flat).
    #[arg(long, allow_hyphen_values = true)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long = "s-prime")]
    pub s_prime: Option<f64>,
    #[arg(long = "t-prime")]
    pub t_prime: Option<f64>,
    /// Bond maturity for single-maturity experiments.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub maturity: Option<f64>,
    /// Geometric maturity grid `start x factor x count`, e.g. 25x2x6.
    #[arg(long)]
    pub grid: Option<MaturityGrid>,
    #[arg(long, default_value_t = DEFAULT_PATHS)]
    pub paths: usize,
    /// Master seed; the DIRLAB_SEED environment variable overrides it.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Tail levels for the Markov bound, comma separated.
    #[arg(long = "ell", value_delimiter = ',', default_values_t = [1.0, 2.0, 3.0])]
    pub ell: Vec<f64>,
    /// Quantile levels of the restart states, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 0.9])]
    pub quantiles: Vec<f64>,
    /// Simulation time step.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// Multiply prices quoted from `--corrupt-from` on by this factor.
    #[arg(long = "corrupt-prices")]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub corrupt_prices: Option<f64>,
    #[arg(long = "corrupt-from")]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub corrupt_from: Option<f64>,
    /// Add `slope * t` to the log deflator.
    #[arg(long = "deflator-drift", allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub deflator_drift: Option<f64>,
    /// Also write the simulated short-rate paths.
    #[arg(long = "dump-ensemble")]
    #[serde(default)]
    pub dump_ensemble: bool,
    /// Output directory.
    #[arg(long, default_value = DEFAULT_OUT)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Both)]
    pub format: OutputFormat,
}

impl ExperimentArgs {
    /// Defaults for `market`, as the command line would fill them in.
    pub fn new(market: MarketKind) -> Self {
        Self {
            market,
            r0: None,
            b: None,
            rate: None,
            s: None,
            t: None,
            s_prime: None,
            t_prime: None,
            maturity: None,
            grid: None,
            paths: DEFAULT_PATHS,
            seed: DEFAULT_SEED,
            delta: DEFAULT_DELTA,
            ell: vec![1.0, 2.0, 3.0],
            quantiles: vec![0.1, 0.5, 0.9],
            step: DEFAULT_STEP,
            corrupt_prices: None,
            corrupt_from: None,
            deflator_drift: None,
            dump_ensemble: false,
            out: PathBuf::from(DEFAULT_OUT),
            format: OutputFormat::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(flatten)]
    pub args: ExperimentArgs,
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, args: ExperimentArgs) -> Self {
        Self { experiment, args }
    }

    /// Command-line arguments (after the program name) that parse back to `self`.
    pub fn to_args(&self) -> Vec<String> {
        let a = &self.args;
        let mut out = vec![
            self.experiment.name().to_string(),
            "--market".into(),
            a.market.name().into(),
        ];
        let mut opt = |flag: &str, v: Option<f64>| {
            if let Some(v) = v {
                out.push(format!("--{flag}"));
                out.push(v.to_string());
            }
        };
        opt("r0", a.r0);
        opt("b", a.b);
        opt("rate", a.rate);
        opt("s", a.s);
        opt("t", a.t);
        opt("s-prime", a.s_prime);
        opt("t-prime", a.t_prime);
        opt("T", a.maturity);
        opt("corrupt-prices", a.corrupt_prices);
        opt("corrupt-from", a.corrupt_from);
        opt("deflator-drift", a.deflator_drift);
        if let Some(g) = a.grid {
            out.extend(["--grid".into(), g.to_string()]);
        }
        out.extend([
            "--paths".into(),
            a.paths.to_string(),
            "--seed".into(),
            a.seed.to_string(),
            "--delta".into(),
            a.delta.to_string(),
            "--ell".into(),
            join(&a.ell),
            "--quantiles".into(),
            join(&a.quantiles),
            "--step".into(),
            a.step.to_string(),
            "--out".into(),
            a.out.display().to_string(),
            "--format".into(),
            a.format.name().into(),
        ]);
        if a.dump_ensemble {
            out.push("--dump-ensemble".into());
        }
        out
    }

    /// Checks that every field the experiment and market need is present and sane.
    pub fn validate(&self) -> Result<(), CliError> {
        let a = &self.args;
        let need = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| CliError::Usage(format!("{} needs --{name}", self.experiment.name())))
        };
        match a.market {
            MarketKind::Vasicek => {
                need("r0", a.r0)?;
                need("b", a.b)?;
            }
            MarketKind::Flat => {
                need("rate", a.rate)?;
            }
            _ => {}
        }
        match self.experiment {
            ExperimentKind::DirYields => {
                need("s", a.s)?;
                need("t", a.t)?;
            }
            ExperimentKind::DirForwards => {
                need("s", a.s)?;
                need("s-prime", a.s_prime)?;
                need("t", a.t)?;
                need("t-prime", a.t_prime)?;
            }
            ExperimentKind::Equivalence => {
                need("t", a.t)?;
                need("t-prime", a.t_prime)?;
            }
            ExperimentKind::DeflatorCheck | ExperimentKind::Arbitrage => {
                need("t", a.t)?;
                need("T", a.maturity)?;
            }
            ExperimentKind::TailBound => {
                need("s", a.s)?;
                need("t", a.t)?;
                need("T", a.maturity)?;
                if a.ell.is_empty() {
                    return Err(CliError::Usage("tail-bound needs at least one --ell".into()));
                }
            }
        }
        if matches!(
            self.experiment,
            ExperimentKind::DirYields | ExperimentKind::DirForwards | ExperimentKind::Equivalence
        ) && a.grid.is_none()
        {
            return Err(CliError::Usage(format!("{} needs --grid", self.experiment.name())));
        }
        if a.paths == 0 {
            return Err(CliError::Usage("--paths must be positive".into()));
        }
        if !(a.step > 0.0) || !a.step.is_finite() {
            return Err(CliError::Usage("--step must be positive".into()));
        }
        if !(a.delta > 0.0 && a.delta < 0.5) {
            return Err(CliError::Usage("--delta must lie in (0, 0.5)".into()));
        }
        if a.corrupt_prices.is_some_and(|f| !(f > 0.0) || !f.is_finite()) {
            return Err(CliError::Usage("--corrupt-prices must be a positive factor".into()));
        }
        Ok(())
    }
}
