use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dirlab_core::deflators::{
    check_deterministic_supermartingale, check_martingale_unconditional,
    check_supermartingale_restart, lattice_triples, markov_tail_check,
};
use dirlab_core::dir_checks::{
    arbitrage_scan, evaluate_short_bond_strategy, forward_dir_experiment,
    forward_yield_equivalence_experiment, golsch_condition_check, yield_dir_experiment,
    ZERO_COST_TOLERANCE,
};
use dirlab_core::io::{fmt17, write_ensemble_csv, write_experiment_csv, write_quantile_csv};
use dirlab_core::markets::{
    build_deterministic_emm_market, build_dir_violation_market, build_flat_market,
    build_min_exp_market, market_from_vasicek, simulate_vasicek,
};
use dirlab_core::{
    Character, DeflatorReport, DirExperimentReport, MarketModel, SavingsAccountSpec, TimeGrid,
    VasicekParams, VerdictParams,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tempfile::NamedTempFile;

use crate::config::{ExperimentConfig, ExperimentKind, MarketKind};
use crate::error::{CliError, EXIT_OK, EXIT_VIOLATION};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config: ExperimentConfig,
    pub duration_secs: f64,
    pub checks: Vec<CheckSummary>,
    /// Files written next to the manifest, in write order.
    pub outputs: Vec<String>,
    pub exit_code: i32,
}

/// Report and tables of a finished experiment, before anything touches disk.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: Value,
    pub tables: Vec<(String, Vec<u8>)>,
    pub checks: Vec<CheckSummary>,
}

impl RunArtifacts {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
    pub exit_code: i32,
}

fn csv_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

fn req(v: Option<f64>, name: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing --{name}")))
}

/// Latest time at which the experiment reads the simulated short rate.
fn ensemble_horizon(config: &ExperimentConfig) -> f64 {
    let a = &config.args;
    [a.s, a.t].into_iter().flatten().fold(0.0, f64::max)
}

pub fn build_market(config: &ExperimentConfig) -> Result<MarketModel, CliError> {
    let a = &config.args;
    let mut market = match a.market {
        MarketKind::Vasicek => {
            let params = VasicekParams::new(req(a.r0, "r0")?, req(a.b, "b")?)?;
            let horizon = ensemble_horizon(config).max(a.step);
            let grid = TimeGrid::uniform(horizon, a.step)?;
            market_from_vasicek(params, simulate_vasicek(params, &grid, a.paths, a.seed)?)?
        }
        MarketKind::DirViolation => build_dir_violation_market(),
        MarketKind::MinExp => build_min_exp_market(),
        MarketKind::ExpNegTSquared => build_deterministic_emm_market(SavingsAccountSpec::ExpNegTSquared)?,
        MarketKind::ExpTSquared => build_deterministic_emm_market(SavingsAccountSpec::ExpTSquared)?,
        MarketKind::Flat => build_flat_market(req(a.rate, "rate")?)?,
    };
    if let Some(factor) = a.corrupt_prices {
        market = market.with_price_corruption(factor, a.corrupt_from.unwrap_or(0.0));
    }
    if let Some(slope) = a.deflator_drift {
        market = market.with_deflator_drift(slope);
    }
    Ok(market)
}

fn dir_artifacts(report: DirExperimentReport) -> Result<RunArtifacts, CliError> {
    let mut tables = Vec::new();
    let mut curve = Vec::new();
    write_experiment_csv(report.curve(), &mut curve).map_err(csv_err)?;
    tables.push(("curve.csv".to_string(), curve));
    let mut quantiles = Vec::new();
    write_quantile_csv(report.curve(), &mut quantiles).map_err(csv_err)?;
    tables.push(("quantiles.csv".to_string(), quantiles));
    let mut checks = vec![CheckSummary {
        name: "theorem conclusion not contradicted".into(),
        pass: !report.property_violated(),
    }];
    if let Some(r) = report.identity_max_residual {
        checks.push(CheckSummary {
            name: "forward/yield identity".into(),
            pass: r <= dirlab_core::dir_checks::IDENTITY_TOLERANCE,
        });
    }
    Ok(RunArtifacts {
        report: serde_json::to_value(&report)?,
        tables,
        checks,
    })
}

fn deflator_csv(report: &DeflatorReport) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    writeln!(out, "kind,s,t,T,estimate,se,bound,allowance,state,pass")?;
    for c in &report.checks {
        let kind = serde_json::to_value(c.kind)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            kind.as_str().unwrap_or_default(),
            fmt17(c.s),
            fmt17(c.t),
            fmt17(c.maturity),
            fmt17(c.estimate),
            fmt17(c.se),
            fmt17(c.bound),
            fmt17(c.allowance),
            c.state.map(fmt17).unwrap_or_default(),
            c.pass
        )?;
    }
    Ok(out)
}

fn deflator_artifacts(config: &ExperimentConfig, market: &MarketModel) -> Result<RunArtifacts, CliError> {
    let a = &config.args;
    let t = req(a.t, "t")?;
    let maturity = req(a.maturity, "T")?;
    let mut reports = Vec::new();
    if market.character() == Character::Deterministic {
        let mut points: Vec<f64> = [Some(0.0), a.s, Some(t), Some(maturity)].into_iter().flatten().collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        reports.push(check_deterministic_supermartingale(market, &lattice_triples(&points))?);
    } else {
        let mut times: Vec<f64> = [Some(0.0), a.s, Some(t)].into_iter().flatten().collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        reports.push(check_martingale_unconditional(market, &times, maturity)?);
        if let Some(s) = a.s {
            reports.push(check_supermartingale_restart(
                market,
                s,
                t,
                maturity,
                &a.quantiles,
                a.paths,
                a.seed,
            )?);
        }
    }
    let mut tables = Vec::new();
    let merged = DeflatorReport {
        market: market.id().to_string(),
        checks: reports.iter().flat_map(|r| r.checks.clone()).collect(),
    };
    tables.push(("checks.csv".to_string(), deflator_csv(&merged)?));
    let checks = merged
        .checks
        .iter()
        .map(|c| {
            let kind = serde_json::to_value(c.kind).ok();
            CheckSummary {
                name: format!(
                    "{} s={} t={} T={}{}",
                    kind.as_ref().and_then(Value::as_str).unwrap_or("check"),
                    c.s,
                    c.t,
                    c.maturity,
                    c.state.map(|r| format!(" r_s={r}")).unwrap_or_default()
                ),
                pass: c.pass,
            }
        })
        .collect();
    Ok(RunArtifacts {
        report: serde_json::to_value(&merged)?,
        tables,
        checks,
    })
}

fn arbitrage_artifacts(config: &ExperimentConfig, market: &MarketModel) -> Result<RunArtifacts, CliError> {
    let t = req(config.args.t, "t")?;
    let maturity = req(config.args.maturity, "T")?;
    let strategy = evaluate_short_bond_strategy(market, t, maturity)?;
    let certificate = arbitrage_scan(market, t, maturity)?;
    let golsch = golsch_condition_check(market, t, maturity)?;
    let mut csv = Vec::new();
    writeln!(csv, "t,T,long_units,entry_cost,payoff,certified,golsch_pass")?;
    writeln!(
        csv,
        "{},{},{},{},{},{},{}",
        fmt17(t),
        fmt17(maturity),
        fmt17(strategy.long_units),
        fmt17(strategy.entry_cost),
        fmt17(strategy.payoff_at_t_plus_1),
        certificate.is_some(),
        golsch.pass
    )?;
    let zero_cost = certificate.is_none_or(|c| c.entry_cost.abs() <= ZERO_COST_TOLERANCE);
    Ok(RunArtifacts {
        report: json!({
            "market": market.id(),
            "strategy": strategy,
            "payoff": strategy.payoff_at_t_plus_1,
            "certificate": certificate,
            "golsch": golsch,
        }),
        tables: vec![("arbitrage.csv".to_string(), csv)],
        checks: vec![CheckSummary {
            name: "certificate has zero entry cost".into(),
            pass: zero_cost,
        }],
    })
}

fn tail_artifacts(config: &ExperimentConfig, market: &MarketModel) -> Result<RunArtifacts, CliError> {
    let a = &config.args;
    let report = markov_tail_check(market, req(a.s, "s")?, req(a.t, "t")?, req(a.maturity, "T")?, &a.ell)?;
    let mut csv = Vec::new();
    writeln!(csv, "ell,p_hat,se,bound,threshold,pass")?;
    for r in &report.rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt17(r.ell),
            fmt17(r.p_hat),
            fmt17(r.se),
            fmt17(r.bound),
            fmt17(r.threshold),
            r.pass
        )?;
    }
    let checks = report
        .rows
        .iter()
        .map(|r| CheckSummary {
            name: format!("markov tail ell={}", r.ell),
            pass: r.pass,
        })
        .collect();
    Ok(RunArtifacts {
        report: serde_json::to_value(&report)?,
        tables: vec![("tail.csv".to_string(), csv)],
        checks,
    })
}

/// Runs the experiment in memory.
pub fn execute(config: &ExperimentConfig) -> Result<RunArtifacts, CliError> {
    config.validate()?;
    let a = &config.args;
    let market = build_market(config)?;
    let params = VerdictParams::with_delta(a.delta);
    let grid = || a.grid.map(|g| g.points()).ok_or_else(|| CliError::Usage("missing --grid".into()));
    let mut artifacts = match config.experiment {
        ExperimentKind::DirYields => {
            let r = yield_dir_experiment(&market, req(a.s, "s")?, req(a.t, "t")?, &grid()?, params)?;
            dir_artifacts(r)?
        }
        ExperimentKind::DirForwards => {
            let r = forward_dir_experiment(
                &market,
                req(a.s, "s")?,
                req(a.s_prime, "s-prime")?,
                req(a.t, "t")?,
                req(a.t_prime, "t-prime")?,
                &grid()?,
                params,
            )?;
            dir_artifacts(r)?
        }
        ExperimentKind::Equivalence => {
            let r = forward_yield_equivalence_experiment(
                &market,
                req(a.t, "t")?,
                req(a.t_prime, "t-prime")?,
                &grid()?,
                params,
            )?;
            dir_artifacts(r)?
        }
        ExperimentKind::DeflatorCheck => deflator_artifacts(config, &market)?,
        ExperimentKind::Arbitrage => arbitrage_artifacts(config, &market)?,
        ExperimentKind::TailBound => tail_artifacts(config, &market)?,
    };
    if a.dump_ensemble {
        if let Some((_, ensemble)) = market.vasicek() {
            let mut buf = Vec::new();
            write_ensemble_csv(ensemble, &mut buf).map_err(csv_err)?;
            artifacts.tables.push(("ensemble.csv".to_string(), buf));
        }
    }
    Ok(artifacts)
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

/// Writes every artifact of a finished run into `out_dir`, manifest last.
pub fn write_run(
    config: &ExperimentConfig,
    artifacts: &RunArtifacts,
    out_dir: &Path,
    started: Instant,
) -> Result<RunManifest, CliError> {
    fs::create_dir_all(out_dir)?;
    let format = config.args.format;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    if format.json() {
        let report = json!({
            "manifest": MANIFEST_FILE,
            "experiment": config.experiment.name(),
            "report": artifacts.report,
        });
        let mut bytes = serde_json::to_vec_pretty(&report)?;
        bytes.push(b'\n');
        files.push((REPORT_FILE.to_string(), bytes));
    }
    if format.csv() {
        files.extend(artifacts.tables.iter().cloned());
    }
    for (name, bytes) in &files {
        write_atomic(out_dir, name, bytes)?;
    }
    let exit_code = if artifacts.all_pass() { EXIT_OK } else { EXIT_VIOLATION };
    let manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION.to_string(),
        config: config.clone(),
        duration_secs: started.elapsed().as_secs_f64(),
        checks: artifacts.checks.clone(),
        outputs: files.into_iter().map(|(n, _)| n).collect(),
        exit_code,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_atomic(out_dir, MANIFEST_FILE, &bytes)?;
    Ok(manifest)
}

/// Executes `config` and writes its outputs to `config.args.out`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    run_into(config, &config.args.out)
}

/// Executes `config` and writes its outputs to `out_dir`.
pub fn run_into(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let artifacts = execute(config)?;
    let manifest = write_run(config, &artifacts, out_dir, started)?;
    Ok(RunOutcome {
        exit_code: manifest.exit_code,
        manifest,
        out_dir: out_dir.to_path_buf(),
    })
}
