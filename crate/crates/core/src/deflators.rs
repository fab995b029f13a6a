//! Checks that a declared deflator `Y` makes `L^T = Y P^T` a supermartingale.
//!
//! Conditional expectations cannot be observed from unconditional samples, so
//! three necessary conditions are verified instead:
//!
//! * exact monotonicity of `L^T` for deterministic markets,
//! * `E[L_t^T] = P_0^T` over the simulated ensemble,
//! * `E[L_t^T / Y_s | r_s] = P_s^T(r_s)` by restarting the short rate from
//!   quantiles of its time-`s` law.
//!
//! Monte Carlo checks pass when the estimate is within `4 SE` plus a
//! discretisation allowance `|m_h - m_{h/2}|` of its target, where the two
//! estimates share the Brownian paths of a grid refined once.
//!
//! [`markov_tail_check`] compares `P[L_t/L_s > e^l]` with the Markov bound `e^{-l}`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::asymptotics::{empirical_tail_prob, mean_and_se};
use crate::error::{domain, Error, Result};
use crate::markets::{simulate_from, vasicek_log_price, Character, MarketModel, TimeGrid};

/// Tolerance of the Monte Carlo checks in standard errors.
pub const SE_MULTIPLIER: f64 = 4.0;

/// Tolerance of the Markov tail check in binomial standard errors.
pub const TAIL_SE_MULTIPLIER: f64 = 3.0;

/// Default restart step when the source grid has a single point.
const DEFAULT_STEP: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    ExactMonotonicity,
    UnconditionalExpectation,
    RestartConditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflatorCheck {
    pub kind: CheckKind,
    pub s: f64,
    pub t: f64,
    #[serde(rename = "T")]
    pub maturity: f64,
    pub estimate: f64,
    pub se: f64,
    pub bound: f64,
    pub allowance: f64,
    /// Restart state `r_s`, for restart-conditional checks.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub state: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflatorReport {
    pub market: String,
    pub checks: Vec<DeflatorCheck>,
}

impl DeflatorReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn require_deflator(market: &MarketModel) -> Result<()> {
    if !market.has_deflator() {
        return Err(Error::Precondition(format!(
            "market {} declares no deflator",
            market.id()
        )));
    }
    Ok(())
}

fn check_order(s: f64, t: f64, maturity: f64) -> Result<()> {
    if !(0.0 <= s && s < t && t <= maturity) || !maturity.is_finite() {
        return domain(format!("need 0 <= s < t <= T, got s={s}, t={t}, T={maturity}"));
    }
    Ok(())
}

/// `log L_t^T = log Y_t + log P_t^T`.
pub fn log_deflated_price(market: &MarketModel, scenario: usize, t: f64, maturity: f64) -> Result<f64> {
    Ok(market.log_deflator(scenario, t)? + market.log_price(scenario, t, maturity)?)
}

/// All `(s, t, T)` with `s < t <= T` drawn from `points`.
pub fn lattice_triples(points: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for &s in points {
        for &t in points.iter().filter(|&&t| t > s) {
            for &m in points.iter().filter(|&&m| m >= t) {
                out.push((s, t, m));
            }
        }
    }
    out
}

/// For deterministic markets: `Y_t P_t^T <= Y_s P_s^T` for each triple.
pub fn check_deterministic_supermartingale(
    market: &MarketModel,
    triples: &[(f64, f64, f64)],
) -> Result<DeflatorReport> {
    if market.character() != Character::Deterministic {
        return Err(Error::Precondition(format!(
            "market {} is stochastic; use the expectation checks",
            market.id()
        )));
    }
    require_deflator(market)?;
    let checks = triples
        .iter()
        .map(|&(s, t, maturity)| {
            check_order(s, t, maturity)?;
            let log_s = log_deflated_price(market, 0, s, maturity)?;
            let log_t = log_deflated_price(market, 0, t, maturity)?;
            // rounding slack for algebraically constant processes
            let slack = 1e-12 * log_s.abs().max(1.0);
            Ok(DeflatorCheck {
                kind: CheckKind::ExactMonotonicity,
                s,
                t,
                maturity,
                estimate: (log_t - log_s).exp(),
                se: 0.0,
                bound: 1.0,
                allowance: 0.0,
                state: None,
                pass: log_t <= log_s + slack,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DeflatorReport {
        market: market.id().to_string(),
        checks,
    })
}

fn deflated_price_mean(market: &MarketModel, t: f64, maturity: f64) -> Result<(f64, f64, bool)> {
    let values = (0..market.n_scenarios())
        .map(|i| {
            let y = market.log_deflator(i, t)?.exp();
            let p = market.log_price(i, t, maturity)?.exp();
            Ok((y, y * p))
        })
        .collect::<Result<Vec<_>>>()?;
    let positive = values.iter().all(|(y, _)| *y > 0.0 && y.is_finite());
    let products: Vec<f64> = values.into_iter().map(|(_, l)| l).collect();
    let (mean, se) = mean_and_se(&products);
    Ok((mean, se, positive))
}

/// Checks `mean(Y_t P_t^T) = P_0^T` at each `t` of `times` on a Vasicek market.
pub fn check_martingale_unconditional(
    market: &MarketModel,
    times: &[f64],
    maturity: f64,
) -> Result<DeflatorReport> {
    require_deflator(market)?;
    let (_, ensemble) = market.vasicek().ok_or_else(|| {
        Error::Precondition(format!("market {} has no simulated ensemble", market.id()))
    })?;
    for &t in times {
        if !(0.0..=maturity).contains(&t) {
            return domain(format!("need 0 <= t <= T, got t={t}, T={maturity}"));
        }
        ensemble.grid().index_of(t)?;
    }
    let target = market.log_price(0, 0.0, maturity)?.exp();

    // Discretisation allowance from one refinement sharing Brownian paths.
    let allowance = if times.iter().any(|&t| t > 0.0) {
        let fine_ensemble = simulate_from(
            ensemble.params(),
            ensemble.params().r0,
            &ensemble.grid().refined(),
            ensemble.n_paths(),
            ensemble.master_seed(),
        )?;
        let coarse = market.with_ensemble(fine_ensemble.coarsen(2)?)?;
        let fine = market.with_ensemble(fine_ensemble)?;
        times
            .iter()
            .filter(|&&t| t > 0.0)
            .map(|&t| {
                let (a, _, _) = deflated_price_mean(&fine, t, maturity)?;
                let (b, _, _) = deflated_price_mean(&coarse, t, maturity)?;
                Ok((a - b).abs())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max)
    } else {
        0.0
    };

    let checks = times
        .iter()
        .map(|&t| {
            let (estimate, se, positive) = deflated_price_mean(market, t, maturity)?;
            let pass = if t == 0.0 {
                (estimate - target).abs() <= 1e-12 * target.abs()
            } else {
                positive && (estimate - target).abs() <= SE_MULTIPLIER * se + allowance
            };
            Ok(DeflatorCheck {
                kind: CheckKind::UnconditionalExpectation,
                s: 0.0,
                t,
                maturity,
                estimate,
                se,
                bound: target,
                allowance: if t == 0.0 { 0.0 } else { allowance },
                state: None,
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DeflatorReport {
        market: market.id().to_string(),
        checks,
    })
}

/// Seed of restart bucket `bucket`, decorrelated from the master seed.
fn bucket_seed(seed: u64, bucket: usize) -> u64 {
    seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(bucket as u64 + 1))
}

/// Restarts the short rate at time `s` from each `quantile_levels` quantile of
/// its time-`s` law and checks `mean(Y_t P_t^T / Y_s) = P_s^T(r_s)`.
pub fn check_supermartingale_restart(
    market: &MarketModel,
    s: f64,
    t: f64,
    maturity: f64,
    quantile_levels: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<DeflatorReport> {
    require_deflator(market)?;
    let (params, ensemble) = market.vasicek().ok_or_else(|| {
        Error::Precondition(format!("market {} is not restartable", market.id()))
    })?;
    check_order(s, t, maturity)?;
    if n_paths < 2 {
        return domain("restart check needs at least 2 paths");
    }
    let step = match ensemble.grid().points() {
        [_, h, ..] => *h,
        _ => DEFAULT_STEP,
    };
    let grid = TimeGrid::uniform(t - s, step)?;
    if (grid.horizon() - (t - s)).abs() > 1e-9 * (t - s).max(1.0) {
        return domain(format!("t - s = {} is not a multiple of the step {step}", t - s));
    }
    let fine_grid = grid.refined();
    let law_sd = params.conditional_variance(s).sqrt();
    let law_mean = params.conditional_mean(params.r0, s);
    let drift = market.log_deflator_drift();
    let b = params.b;

    let mut checks = Vec::with_capacity(quantile_levels.len());
    for (bucket, &q) in quantile_levels.iter().enumerate() {
        if !(q > 0.0 && q < 1.0) {
            return domain(format!("quantile level must lie in (0, 1), got {q}"));
        }
        let r_s = if law_sd > 0.0 {
            Normal::new(law_mean, law_sd)
                .map_err(|e| Error::Domain(e.to_string()))?
                .inverse_cdf(q)
        } else {
            law_mean
        };
        let target_log = vasicek_log_price(r_s, maturity - s, b) + market.price_shift_at(s, maturity);
        let deflated_mean = |paths: &crate::markets::ScenarioEnsemble| {
            let last = paths.grid().len() - 1;
            let values: Vec<f64> = (0..paths.n_paths())
                .map(|i| {
                    let r_t = paths.short_rate(i)[last];
                    let log_ratio = -paths.integrated_rate(i)[last]
                        + drift * (t - s)
                        + vasicek_log_price(r_t, maturity - t, b)
                        + market.price_shift_at(t, maturity);
                    log_ratio.exp()
                })
                .collect();
            mean_and_se(&values)
        };
        let sub_seed = bucket_seed(seed, bucket);
        let restarted = simulate_from(params, r_s, &grid, n_paths, sub_seed)?;
        let (estimate, se) = deflated_mean(&restarted);
        let fine = simulate_from(params, r_s, &fine_grid, n_paths, sub_seed)?;
        let allowance = (deflated_mean(&fine).0 - deflated_mean(&fine.coarsen(2)?).0).abs();
        let target = target_log.exp();
        checks.push(DeflatorCheck {
            kind: CheckKind::RestartConditional,
            s,
            t,
            maturity,
            estimate,
            se,
            bound: target,
            allowance,
            state: Some(r_s),
            pass: (estimate - target).abs() <= SE_MULTIPLIER * se + allowance,
        });
    }
    Ok(DeflatorReport {
        market: market.id().to_string(),
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovTailRow {
    pub ell: f64,
    pub p_hat: f64,
    pub se: f64,
    /// Markov bound `e^{-l}`.
    pub bound: f64,
    /// `e^{-l} + 3 sqrt(e^{-l}(1 - e^{-l}) / n)`
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovTailReport {
    pub market: String,
    pub s: f64,
    pub t: f64,
    #[serde(rename = "T")]
    pub maturity: f64,
    pub n: usize,
    pub rows: Vec<MarkovTailRow>,
}

impl MarkovTailReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Empirical `P[L_t^T / L_s^T > e^l]` against the Markov bound, per `l`.
pub fn markov_tail_check(
    market: &MarketModel,
    s: f64,
    t: f64,
    maturity: f64,
    ells: &[f64],
) -> Result<MarkovTailReport> {
    require_deflator(market)?;
    check_order(s, t, maturity)?;
    let log_ratios = (0..market.n_scenarios())
        .map(|i| {
            Ok(log_deflated_price(market, i, t, maturity)? - log_deflated_price(market, i, s, maturity)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = log_ratios.len();
    let rows = ells
        .iter()
        .map(|&ell| {
            if !(ell >= 0.0) || !ell.is_finite() {
                return domain(format!("tail level must be finite and nonnegative, got {ell}"));
            }
            let (p_hat, se) = empirical_tail_prob(&log_ratios, ell)?;
            let bound = (-ell).exp();
            let threshold = bound + TAIL_SE_MULTIPLIER * (bound * (1.0 - bound) / n as f64).sqrt();
            Ok(MarkovTailRow {
                ell,
                p_hat,
                se,
                bound,
                threshold,
                pass: p_hat <= threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarkovTailReport {
        market: market.id().to_string(),
        s,
        t,
        maturity,
        n,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markets::{
        build_deterministic_emm_market, build_dir_violation_market, build_min_exp_market,
        market_from_vasicek, simulate_vasicek, DeflatorSpec, SavingsAccountSpec, VasicekParams,
    };

    fn vasicek_market(horizon: f64, n: usize, seed: u64) -> MarketModel {
        let p = VasicekParams::new(1.0, 1.5).unwrap();
        let g = TimeGrid::uniform(horizon, 1.0 / 64.0).unwrap();
        market_from_vasicek(p, simulate_vasicek(p, &g, n, seed).unwrap()).unwrap()
    }

    #[test]
    fn min_exp_is_nonincreasing() {
        let pts = [0.0, 0.5, 1.0, 2.0, 3.5, 6.0];
        let r = check_deterministic_supermartingale(&build_min_exp_market(), &lattice_triples(&pts)).unwrap();
        assert!(!r.checks.is_empty());
        assert!(r.all_pass());
    }

    #[test]
    fn exp_t_squared_is_a_martingale() {
        let m = build_deterministic_emm_market(SavingsAccountSpec::ExpTSquared).unwrap();
        let r = check_deterministic_supermartingale(&m, &lattice_triples(&[0.0, 1.0, 2.5, 4.0, 9.0])).unwrap();
        assert!(r.all_pass());
        for c in &r.checks {
            assert!((c.estimate - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn trial_unit_deflator_fails_on_dir_violation_market() {
        let m = build_dir_violation_market();
        assert!(matches!(
            check_deterministic_supermartingale(&m, &[(0.0, 1.0, 2.0)]),
            Err(Error::Precondition(_))
        ));
        let trial = m.with_deflator(DeflatorSpec::Deterministic { linear: 0.0, quadratic: 0.0 });
        let r = check_deterministic_supermartingale(&trial, &[(0.5, 1.0, 2.0)]).unwrap();
        assert!(!r.checks[0].pass);
        assert!((r.checks[0].estimate - 3f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn deterministic_check_rejects_bad_triples() {
        let m = build_min_exp_market();
        assert!(check_deterministic_supermartingale(&m, &[(1.0, 1.0, 2.0)]).is_err());
        assert!(check_deterministic_supermartingale(&m, &[(0.0, 3.0, 2.0)]).is_err());
        assert!(check_deterministic_supermartingale(&vasicek_market(1.0, 4, 1), &[(0.0, 1.0, 2.0)]).is_err());
    }

    #[test]
    fn unconditional_at_time_zero_is_exact() {
        let m = vasicek_market(1.0, 100, 3);
        let r = check_martingale_unconditional(&m, &[0.0], 5.0).unwrap();
        assert!(r.checks[0].pass);
        assert!(r.checks[0].se <= 1e-15);
        assert!(check_martingale_unconditional(&m, &[0.3], 5.0).is_err());
        assert!(check_martingale_unconditional(&build_min_exp_market(), &[0.0], 5.0).is_err());
    }

    #[test]
    fn unconditional_passes_on_vasicek() {
        let m = vasicek_market(1.0, 20_000, 17);
        let r = check_martingale_unconditional(&m, &[0.25, 0.5, 1.0], 5.0).unwrap();
        assert!(r.all_pass(), "{r:#?}");
    }

    #[test]
    fn restart_requires_vasicek() {
        let m = build_min_exp_market();
        assert!(matches!(
            check_supermartingale_restart(&m, 1.0, 2.0, 6.0, &[0.5], 100, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn markov_rows() {
        let r = markov_tail_check(&build_min_exp_market(), 1.0, 2.0, 6.0, &[0.0, 0.5, 2.0]).unwrap();
        assert!(r.all_pass());
        assert!(r.rows.iter().skip(1).all(|row| row.p_hat == 0.0));
        assert_eq!(r.rows[0].bound, 1.0);
        assert!(markov_tail_check(&build_min_exp_market(), 2.0, 1.0, 6.0, &[1.0]).is_err());
        assert!(markov_tail_check(&build_min_exp_market(), 1.0, 2.0, 6.0, &[-1.0]).is_err());
        assert!(markov_tail_check(&build_dir_violation_market(), 1.0, 2.0, 6.0, &[1.0]).is_err());
    }

    #[test]
    fn report_json_shape() {
        let r = check_deterministic_supermartingale(&build_min_exp_market(), &[(0.0, 1.0, 3.0)]).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["market"], "min-exp");
        let c = &v["checks"][0];
        for key in ["kind", "s", "t", "T", "estimate", "se", "bound", "pass"] {
            assert!(c.get(key).is_some(), "missing {key}");
        }
        assert_eq!(c["kind"], "exact-monotonicity");
    }
}
