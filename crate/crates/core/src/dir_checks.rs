//! Long-maturity domination experiments and the short-bond arbitrage.
//!
//! Each experiment builds a paired [`StatisticFamily`] over a maturity grid from
//! one market and classifies it with [`op_bound_verdict`]. Verdicts are
//! market-level: every example market has its boundedness events equal to the
//! whole space or empty, so no per-scenario event membership is attempted.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    mean_and_se, op_bound_verdict, plimsup_band, variance_and_se, BoundednessVerdict, Direction,
    PlimsupBand, Rate, StatisticFamily, TailQuantileCurve, Verdict, VerdictParams, VERDICT_CAVEAT,
};
use crate::error::{domain, Error, Result};
use crate::markets::{Character, MarketModel};
use crate::term_structure::forward_yield_identity_residual;

/// Relative tolerance of the forward/yield identity.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Tolerance on the zero entry cost of an arbitrage certificate.
pub const ZERO_COST_TOLERANCE: f64 = 1e-12;

pub const NO_DEFLATOR_NOTE: &str = "no deflator declared; theorem hypothesis unmet";
const MARKET_LEVEL_NOTE: &str = "event verdicts are market-level, not per scenario";

/// Geometric maturity grid `start * factor^k`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaturityGrid {
    pub start: f64,
    pub factor: f64,
    pub count: usize,
}

impl MaturityGrid {
    pub fn new(start: f64, factor: f64, count: usize) -> Result<Self> {
        if !(start > 0.0) || !start.is_finite() || !(factor > 1.0) || !factor.is_finite() || count == 0 {
            return domain(format!(
                "grid needs start > 0, factor > 1, count >= 1; got {start}x{factor}x{count}"
            ));
        }
        Ok(Self { start, factor, count })
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.start * self.factor.powi(k as i32))
            .collect()
    }
}

impl fmt::Display for MaturityGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.start, self.factor, self.count)
    }
}

impl FromStr for MaturityGrid {
    type Err = Error;

    /// Parses `AxBxC`: start `A`, factor `B`, `C` points.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('x').collect();
        let bad = || Error::Domain(format!("grid spec must look like 25x2x6, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start = parts[0].parse().map_err(|_| bad())?;
        let factor = parts[1].parse().map_err(|_| bad())?;
        let count = parts[2].parse().map_err(|_| bad())?;
        Self::new(start, factor, count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DirYields,
    Equivalence,
    DirForwards,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVerdict {
    pub label: String,
    pub verdict: BoundednessVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledBand {
    pub label: String,
    pub bands: Vec<PlimsupBand>,
}

/// Moments of the statistic at the largest maturity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitDiagnostics {
    #[serde(rename = "T")]
    pub maturity: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    /// The unscaled difference at the largest maturity, for deterministic markets.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirExperimentReport {
    pub experiment: ExperimentKind,
    pub market: String,
    pub deflator_declared: bool,
    pub s: Option<f64>,
    pub s_prime: Option<f64>,
    pub t: Option<f64>,
    pub t_prime: Option<f64>,
    pub maturities: Vec<f64>,
    pub n_scenarios: usize,
    pub seed: Option<u64>,
    pub statistic: String,
    /// Verdict in the direction the theorem speaks about.
    pub verdict: BoundednessVerdict,
    /// The remaining directions of the statistic and the hypothesis events.
    pub supporting: Vec<LabeledVerdict>,
    pub bands: Vec<LabeledBand>,
    pub diagnostics: LimitDiagnostics,
    /// Hypotheses of the theorem (deflator and event verdicts) are all met.
    pub hypothesis_met: bool,
    /// Largest relative residual of the forward/yield identity.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub identity_max_residual: Option<f64>,
    /// Decisive verdicts of the paired conditions agree.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub equivalence_consistent: Option<bool>,
    pub notes: Vec<String>,
}

impl DirExperimentReport {
    pub fn supporting(&self, label: &str) -> Option<&BoundednessVerdict> {
        self.supporting
            .iter()
            .find(|v| v.label == label)
            .map(|v| &v.verdict)
    }

    pub fn band(&self, label: &str) -> Option<&[PlimsupBand]> {
        self.bands
            .iter()
            .find(|b| b.label == label)
            .map(|b| b.bands.as_slice())
    }

    pub fn curve(&self) -> &TailQuantileCurve {
        &self.verdict.evidence
    }

    /// Whether the run contradicts what the theory asserts for it.
    pub fn property_violated(&self) -> bool {
        let identity_broken = self
            .identity_max_residual
            .is_some_and(|r| !(r <= IDENTITY_TOLERANCE));
        let conclusion_broken = match self.experiment {
            ExperimentKind::Equivalence => self.equivalence_consistent == Some(false),
            _ => self.hypothesis_met && self.verdict.verdict == Verdict::Unbounded,
        };
        identity_broken || conclusion_broken
    }
}

fn seed_of(market: &MarketModel) -> Option<u64> {
    market.vasicek().map(|(_, e)| e.master_seed())
}

fn check_grid(grid: &[f64], after: f64) -> Result<()> {
    if grid.iter().any(|&m| !(m > after)) {
        return domain(format!("all maturities must exceed {after}"));
    }
    Ok(())
}

fn yield_family(market: &MarketModel, t: f64, grid: &[f64]) -> Result<StatisticFamily> {
    StatisticFamily::from_fn(grid, market.n_scenarios(), |i, m| market.yield_at(i, t, m))
}

fn diagnostics(family: &StatisticFamily, exact: Option<f64>) -> LimitDiagnostics {
    let last = family.samples().last().expect("nonempty grid");
    let (mean, mean_se) = mean_and_se(last);
    let (variance, variance_se) = variance_and_se(last);
    LimitDiagnostics {
        maturity: *family.maturities().last().expect("nonempty grid"),
        mean,
        mean_se,
        variance,
        variance_se,
        exact_difference: exact,
    }
}

fn labeled(label: &str, verdict: BoundednessVerdict) -> LabeledVerdict {
    LabeledVerdict {
        label: label.to_string(),
        verdict,
    }
}

fn base_notes(market: &MarketModel) -> Vec<String> {
    let mut notes = vec![MARKET_LEVEL_NOTE.to_string(), VERDICT_CAVEAT.to_string()];
    if !market.has_deflator() {
        notes.insert(0, NO_DEFLATOR_NOTE.to_string());
    }
    notes
}

/// Market-level verdict on `R_t^T` over `grid`, e.g. `Below` for the event
/// where long yields at `t` stay bounded below.
pub fn yield_bound_verdict(
    market: &MarketModel,
    t: f64,
    grid: &[f64],
    direction: Direction,
    params: VerdictParams,
) -> Result<BoundednessVerdict> {
    check_grid(grid, t)?;
    op_bound_verdict(&yield_family(market, t, grid)?, Rate::One, direction, params)
}

/// `xi^T = T (R_s^T - R_t^T)`, bounded above on the event where `R_t` is
/// bounded below whenever a deflator exists.
pub fn yield_dir_experiment(
    market: &MarketModel,
    s: f64,
    t: f64,
    grid: &[f64],
    params: VerdictParams,
) -> Result<DirExperimentReport> {
    if !(s <= t) || s < 0.0 {
        return domain(format!("need 0 <= s <= t, got s={s}, t={t}"));
    }
    check_grid(grid, t)?;
    let r_s = yield_family(market, s, grid)?;
    let r_t = yield_family(market, t, grid)?;
    let stat = r_s.difference(&r_t)?.scaled(|m| m)?;

    let verdict = op_bound_verdict(&stat, Rate::One, Direction::Above, params)?;
    let below = op_bound_verdict(&stat, Rate::One, Direction::Below, params)?;
    let two = op_bound_verdict(&stat, Rate::One, Direction::TwoSided, params)?;
    let phi_down_s = op_bound_verdict(&r_s, Rate::One, Direction::Below, params)?;
    let phi_down_t = op_bound_verdict(&r_t, Rate::One, Direction::Below, params)?;

    let hypothesis_met = market.has_deflator() && phi_down_t.verdict == Verdict::Bounded;
    let mut notes = base_notes(market);
    if phi_down_t.verdict != Verdict::Bounded {
        notes.push(format!(
            "R_t is not bounded below at t={t} ({:?}); domination is not asserted",
            phi_down_t.verdict
        ));
    }
    let exact = (market.character() == Character::Deterministic).then(|| {
        let last = grid.len() - 1;
        r_s.samples()[last][0] - r_t.samples()[last][0]
    });

    Ok(DirExperimentReport {
        experiment: ExperimentKind::DirYields,
        market: market.id().to_string(),
        deflator_declared: market.has_deflator(),
        s: Some(s),
        s_prime: None,
        t: Some(t),
        t_prime: None,
        maturities: grid.to_vec(),
        n_scenarios: market.n_scenarios(),
        seed: seed_of(market),
        statistic: "T*(R_s^T - R_t^T)".into(),
        diagnostics: diagnostics(&stat, exact),
        bands: vec![
            LabeledBand {
                label: "R_s".into(),
                bands: plimsup_band(&r_s, &[params.delta])?,
            },
            LabeledBand {
                label: "R_t".into(),
                bands: plimsup_band(&r_t, &[params.delta])?,
            },
        ],
        verdict,
        supporting: vec![
            labeled("statistic below", below),
            labeled("statistic two-sided", two),
            labeled("R_s below", phi_down_s),
            labeled("R_t below", phi_down_t),
        ],
        hypothesis_met,
        identity_max_residual: None,
        equivalence_consistent: None,
        notes,
    })
}

/// `xi^T = T (F_{t,t'}^T - R_t^T)` and the identity
/// `(T - t')(F - R_t^T) = (t' - t)(R_t^T - R_t^{t'})` per scenario.
pub fn forward_yield_equivalence_experiment(
    market: &MarketModel,
    t: f64,
    t_prime: f64,
    grid: &[f64],
    params: VerdictParams,
) -> Result<DirExperimentReport> {
    if !(0.0 <= t && t < t_prime) {
        return domain(format!("need 0 <= t < t', got t={t}, t'={t_prime}"));
    }
    check_grid(grid, t_prime)?;
    let n = market.n_scenarios();
    let r_t = yield_family(market, t, grid)?;
    let fwd = StatisticFamily::from_fn(grid, n, |i, m| market.forward_at(i, t, t_prime, m))?;
    let stat = fwd.difference(&r_t)?.scaled(|m| m)?;

    let mut max_residual: f64 = 0.0;
    for (j, &m) in grid.iter().enumerate() {
        for i in 0..n {
            let r_short = market.yield_at(i, t, t_prime)?;
            let resid = forward_yield_identity_residual(
                fwd.samples()[j][i],
                r_t.samples()[j][i],
                r_short,
                t,
                t_prime,
                m,
            );
            max_residual = max_residual.max(resid);
        }
    }

    let verdict = op_bound_verdict(&stat, Rate::One, Direction::TwoSided, params)?;
    let mut supporting = Vec::new();
    let mut consistent = true;
    for (dir, name) in [(Direction::Above, "above"), (Direction::Below, "below")] {
        let xi = op_bound_verdict(&stat, Rate::One, dir, params)?;
        let r = op_bound_verdict(&r_t, Rate::One, dir, params)?;
        if xi.verdict != Verdict::Inconclusive
            && r.verdict != Verdict::Inconclusive
            && xi.verdict != r.verdict
        {
            consistent = false;
        }
        supporting.push(labeled(&format!("statistic {name}"), xi));
        supporting.push(labeled(&format!("R_t {name}"), r));
    }
    let r_two = op_bound_verdict(&r_t, Rate::One, Direction::TwoSided, params)?;
    supporting.push(labeled("R_t two-sided", r_two));

    let exact = (market.character() == Character::Deterministic).then(|| {
        let last = grid.len() - 1;
        fwd.samples()[last][0] - r_t.samples()[last][0]
    });
    let mut notes = base_notes(market);
    notes.push("the equivalence holds without any viability assumption".into());

    Ok(DirExperimentReport {
        experiment: ExperimentKind::Equivalence,
        market: market.id().to_string(),
        deflator_declared: market.has_deflator(),
        s: None,
        s_prime: None,
        t: Some(t),
        t_prime: Some(t_prime),
        maturities: grid.to_vec(),
        n_scenarios: n,
        seed: seed_of(market),
        statistic: "T*(F_{t,t'}^T - R_t^T)".into(),
        diagnostics: diagnostics(&stat, exact),
        bands: vec![LabeledBand {
            label: "R_t".into(),
            bands: plimsup_band(&r_t, &[params.delta])?,
        }],
        verdict,
        supporting,
        hypothesis_met: true,
        identity_max_residual: Some(max_residual),
        equivalence_consistent: Some(consistent),
        notes,
    })
}

/// `xi^T = T (F_{s,s'}^T - F_{t,t'}^T)`, bounded above where `R_s` is bounded
/// above and `R_t` bounded below, whenever a deflator exists.
pub fn forward_dir_experiment(
    market: &MarketModel,
    s: f64,
    s_prime: f64,
    t: f64,
    t_prime: f64,
    grid: &[f64],
    params: VerdictParams,
) -> Result<DirExperimentReport> {
    if !(0.0 <= s && s <= t && s < s_prime && t < t_prime) {
        return domain(format!(
            "need s <= t, s < s', t < t'; got s={s}, s'={s_prime}, t={t}, t'={t_prime}"
        ));
    }
    check_grid(grid, s_prime.max(t_prime))?;
    let n = market.n_scenarios();
    let f_s = StatisticFamily::from_fn(grid, n, |i, m| market.forward_at(i, s, s_prime, m))?;
    let f_t = StatisticFamily::from_fn(grid, n, |i, m| market.forward_at(i, t, t_prime, m))?;
    let stat = f_s.difference(&f_t)?.scaled(|m| m)?;
    let r_s = yield_family(market, s, grid)?;
    let r_t = yield_family(market, t, grid)?;

    let verdict = op_bound_verdict(&stat, Rate::One, Direction::Above, params)?;
    let phi_up_s = op_bound_verdict(&r_s, Rate::One, Direction::Above, params)?;
    let phi_down_t = op_bound_verdict(&r_t, Rate::One, Direction::Below, params)?;
    let hypothesis_met = market.has_deflator()
        && phi_up_s.verdict == Verdict::Bounded
        && phi_down_t.verdict == Verdict::Bounded;

    let mut notes = base_notes(market);
    if phi_up_s.verdict != Verdict::Bounded {
        notes.push(format!(
            "R_s is not bounded above at s={s} ({:?}); domination is not asserted",
            phi_up_s.verdict
        ));
    }
    if phi_down_t.verdict != Verdict::Bounded {
        notes.push(format!(
            "R_t is not bounded below at t={t} ({:?}); domination is not asserted",
            phi_down_t.verdict
        ));
    }
    let exact = (market.character() == Character::Deterministic).then(|| {
        let last = grid.len() - 1;
        f_s.samples()[last][0] - f_t.samples()[last][0]
    });

    Ok(DirExperimentReport {
        experiment: ExperimentKind::DirForwards,
        market: market.id().to_string(),
        deflator_declared: market.has_deflator(),
        s: Some(s),
        s_prime: Some(s_prime),
        t: Some(t),
        t_prime: Some(t_prime),
        maturities: grid.to_vec(),
        n_scenarios: n,
        seed: seed_of(market),
        statistic: "T*(F_{s,s'}^T - F_{t,t'}^T)".into(),
        diagnostics: diagnostics(&stat, exact),
        bands: vec![
            LabeledBand {
                label: "R_s".into(),
                bands: plimsup_band(&r_s, &[params.delta])?,
            },
            LabeledBand {
                label: "R_t".into(),
                bands: plimsup_band(&r_t, &[params.delta])?,
            },
        ],
        verdict,
        supporting: vec![
            labeled("R_s above", phi_up_s),
            labeled("R_t below", phi_down_t),
        ],
        hypothesis_met,
        identity_max_residual: None,
        equivalence_consistent: None,
        notes,
    })
}

/// Zero-cost portfolio long `exp(T - t - 1)` T-bonds, short one (t+1)-bond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageCertificate {
    pub entry_time: f64,
    pub short_maturity: f64,
    pub long_maturity: f64,
    pub long_units: f64,
    pub short_units: f64,
    pub entry_cost: f64,
    pub payoff_at_t_plus_1: f64,
}

fn require_deterministic(market: &MarketModel, t: f64, maturity: f64) -> Result<()> {
    if market.character() != Character::Deterministic {
        return Err(Error::Precondition(format!(
            "market {} is stochastic; the scan needs deterministic prices",
            market.id()
        )));
    }
    if !(maturity >= t + 2.0) || t < 0.0 {
        return domain(format!("need T >= t + 2, got t={t}, T={maturity}"));
    }
    Ok(())
}

/// Cost and `t+1` value of the short-bond strategy, whether or not it is an arbitrage.
pub fn evaluate_short_bond_strategy(
    market: &MarketModel,
    t: f64,
    maturity: f64,
) -> Result<ArbitrageCertificate> {
    require_deterministic(market, t, maturity)?;
    let log_units = maturity - t - 1.0;
    let entry_cost = (log_units + market.log_price(0, t, maturity)?).exp()
        - market.log_price(0, t, t + 1.0)?.exp();
    let payoff = (log_units + market.log_price(0, t + 1.0, maturity)?).exp()
        - market.log_price(0, t + 1.0, t + 1.0)?.exp();
    Ok(ArbitrageCertificate {
        entry_time: t,
        short_maturity: t + 1.0,
        long_maturity: maturity,
        long_units: log_units.exp(),
        short_units: 1.0,
        entry_cost,
        payoff_at_t_plus_1: payoff,
    })
}

/// The strategy as a certificate when it costs nothing and pays a positive amount.
pub fn arbitrage_scan(
    market: &MarketModel,
    t: f64,
    maturity: f64,
) -> Result<Option<ArbitrageCertificate>> {
    let c = evaluate_short_bond_strategy(market, t, maturity)?;
    Ok((c.entry_cost.abs() <= ZERO_COST_TOLERANCE && c.payoff_at_t_plus_1 > 0.0).then_some(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GolschOutcome {
    pub pass: bool,
    /// `P_t^T`
    pub price: f64,
    /// `P_t^{t+1} P_{t+1}^T`
    pub rolled_price: f64,
    /// `(t, t + 1, T)` when the condition fails.
    pub witness: Option<(f64, f64, f64)>,
}

/// Deterministic roll-over condition `P_t^T >= P_t^{t+1} P_{t+1}^T`.
pub fn golsch_condition_check(market: &MarketModel, t: f64, maturity: f64) -> Result<GolschOutcome> {
    require_deterministic(market, t, maturity)?;
    let lhs = market.log_price(0, t, maturity)?;
    let rhs = market.log_price(0, t, t + 1.0)? + market.log_price(0, t + 1.0, maturity)?;
    let pass = lhs >= rhs - 1e-12 * lhs.abs().max(1.0);
    Ok(GolschOutcome {
        pass,
        price: lhs.exp(),
        rolled_price: rhs.exp(),
        witness: (!pass).then_some((t, t + 1.0, maturity)),
    })
}
