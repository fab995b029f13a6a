//! The example bond markets.
//!
//! Every market exposes `log P_t^T` per scenario as its primitive, together with
//! an optional strictly positive deflator `Y`. Deterministic markets have a
//! single scenario and ignore the scenario index; the Vasicek market is backed
//! by a [`ScenarioEnsemble`] and only evaluates on its simulation grid.

mod vasicek;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::term_structure::{forward_rate_from_log_prices, yield_from_log_price, BondPrice};

pub use vasicek::{
    simulate_vasicek, vasicek_log_price, vasicek_yield, ScenarioEnsemble, TimeGrid, VasicekParams,
};
pub(crate) use vasicek::simulate_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Character {
    Deterministic,
    Stochastic,
}

/// Savings account `B` used to generate a market with `Q = P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SavingsAccountSpec {
    /// `B_t = exp(-t^2)`
    ExpNegTSquared,
    /// `B_t = exp(t^2)`
    ExpTSquared,
    /// `B_t = exp(int_0^t r_u du)`
    ShortRateIntegral,
}

/// The deflator declared alongside a market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DeflatorSpec {
    Absent,
    /// `log Y_t = linear * t + quadratic * t^2`
    Deterministic { linear: f64, quadratic: f64 },
    /// `log Y_t = -int_0^t r_u du`, i.e. `Y = 1/B`.
    SavingsAccount,
}

#[derive(Debug, Clone)]
enum Structure {
    DirViolation,
    MinExp,
    Emm(SavingsAccountSpec),
    Flat { rate: f64 },
    Vasicek(Arc<ScenarioEnsemble>),
}

/// A bond-price surface `P_t^T` with its declared deflator.
#[derive(Debug, Clone)]
pub struct MarketModel {
    id: String,
    structure: Structure,
    deflator: DeflatorSpec,
    price_fault: Option<PriceFault>,
    log_deflator_drift: f64,
}

#[derive(Debug, Clone, Copy)]
struct PriceFault {
    log_scale: f64,
    from_time: f64,
}

impl MarketModel {
    fn new(id: &str, structure: Structure, deflator: DeflatorSpec) -> Self {
        Self {
            id: id.to_string(),
            structure,
            deflator,
            price_fault: None,
            log_deflator_drift: 0.0,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn character(&self) -> Character {
        match self.structure {
            Structure::Vasicek(_) => Character::Stochastic,
            _ => Character::Deterministic,
        }
    }

    pub fn deflator(&self) -> DeflatorSpec {
        self.deflator
    }

    pub fn has_deflator(&self) -> bool {
        self.deflator != DeflatorSpec::Absent
    }

    /// Number of distinct scenarios; 1 for deterministic markets.
    pub fn n_scenarios(&self) -> usize {
        match &self.structure {
            Structure::Vasicek(e) => e.n_paths(),
            _ => 1,
        }
    }

    /// Parameters and ensemble of a Vasicek market.
    pub fn vasicek(&self) -> Option<(VasicekParams, &ScenarioEnsemble)> {
        match &self.structure {
            Structure::Vasicek(e) => Some((e.params(), e)),
            _ => None,
        }
    }

    /// Replaces the declared deflator, e.g. to test a trial candidate.
    pub fn with_deflator(mut self, deflator: DeflatorSpec) -> Self {
        self.deflator = deflator;
        self
    }

    /// Scales every `P_t^T` with `from_time <= t < T` by `factor` (fault injection).
    pub fn with_price_corruption(mut self, factor: f64, from_time: f64) -> Self {
        self.price_fault = Some(PriceFault {
            log_scale: factor.ln(),
            from_time,
        });
        self
    }

    /// Same market and deflator on a different simulated ensemble.
    pub(crate) fn with_ensemble(&self, ensemble: ScenarioEnsemble) -> Result<Self> {
        match &self.structure {
            Structure::Vasicek(e) if e.params() == ensemble.params() => Ok(Self {
                structure: Structure::Vasicek(Arc::new(ensemble)),
                ..self.clone()
            }),
            _ => Err(Error::Precondition(format!(
                "market {} cannot be rebuilt on a Vasicek ensemble",
                self.id
            ))),
        }
    }

    /// Additive log-price fault at `(t, T)`.
    pub(crate) fn price_shift_at(&self, t: f64, maturity: f64) -> f64 {
        match self.price_fault {
            Some(f) if t >= f.from_time && t < maturity => f.log_scale,
            _ => 0.0,
        }
    }

    pub(crate) fn log_deflator_drift(&self) -> f64 {
        self.log_deflator_drift
    }

    /// Adds `slope * t` to `log Y_t` (fault injection).
    pub fn with_deflator_drift(mut self, slope: f64) -> Self {
        self.log_deflator_drift += slope;
        self
    }

    fn check_times(t: f64, maturity: f64) -> Result<()> {
        if !t.is_finite() || !maturity.is_finite() || t < 0.0 || maturity < t {
            return domain(format!("need 0 <= t <= T, got t={t}, T={maturity}"));
        }
        Ok(())
    }

    fn scenario_rate(e: &ScenarioEnsemble, scenario: usize, t: f64) -> Result<(usize, f64)> {
        if scenario >= e.n_paths() {
            return domain(format!("scenario {scenario} out of range ({} paths)", e.n_paths()));
        }
        let idx = e.grid().index_of(t)?;
        Ok((idx, e.short_rate(scenario)[idx]))
    }

    /// `log P_t^T` in `scenario`.
    pub fn log_price(&self, scenario: usize, t: f64, maturity: f64) -> Result<f64> {
        Self::check_times(t, maturity)?;
        let raw = match &self.structure {
            Structure::DirViolation => {
                if t < 1.0 {
                    0.0
                } else {
                    (maturity - t) * (maturity + t)
                }
            }
            Structure::MinExp => (1.0 - (maturity - t)).min(0.0),
            Structure::Emm(spec) => {
                let sign = match spec {
                    SavingsAccountSpec::ExpNegTSquared => -1.0,
                    SavingsAccountSpec::ExpTSquared => 1.0,
                    SavingsAccountSpec::ShortRateIntegral => unreachable!("rejected at build"),
                };
                // log B_t - log B_T
                sign * (t - maturity) * (t + maturity)
            }
            Structure::Flat { rate } => -rate * (maturity - t),
            Structure::Vasicek(e) => {
                let (_, r) = Self::scenario_rate(e, scenario, t)?;
                vasicek_log_price(r, maturity - t, e.params().b)
            }
        };
        if maturity == t {
            return Ok(0.0);
        }
        Ok(raw + self.price_shift_at(t, maturity))
    }

    pub fn price(&self, scenario: usize, t: f64, maturity: f64) -> Result<BondPrice> {
        BondPrice::from_log(self.log_price(scenario, t, maturity)?)
    }

    /// `log Y_t` in `scenario`; a precondition error when no deflator is declared.
    pub fn log_deflator(&self, scenario: usize, t: f64) -> Result<f64> {
        Self::check_times(t, t)?;
        let base = match (self.deflator, &self.structure) {
            (DeflatorSpec::Absent, _) => {
                return Err(Error::Precondition(format!(
                    "market {} declares no deflator",
                    self.id
                )))
            }
            (DeflatorSpec::Deterministic { linear, quadratic }, _) => {
                linear * t + quadratic * t * t
            }
            (DeflatorSpec::SavingsAccount, Structure::Vasicek(e)) => {
                let (idx, _) = Self::scenario_rate(e, scenario, t)?;
                -e.integrated_rate(scenario)[idx]
            }
            (DeflatorSpec::SavingsAccount, _) => {
                return Err(Error::Precondition(format!(
                    "market {} has no short-rate savings account",
                    self.id
                )))
            }
        };
        Ok(base + self.log_deflator_drift * t)
    }

    /// `R_t^T` in `scenario`.
    pub fn yield_at(&self, scenario: usize, t: f64, maturity: f64) -> Result<f64> {
        yield_from_log_price(self.log_price(scenario, t, maturity)?, t, maturity)
    }

    /// `F_{t,t'}^T` in `scenario`.
    pub fn forward_at(&self, scenario: usize, t: f64, t_prime: f64, maturity: f64) -> Result<f64> {
        if !(t < t_prime && t_prime < maturity) {
            return domain(format!(
                "forward rate needs t < t' < T, got t={t}, t'={t_prime}, T={maturity}"
            ));
        }
        let short = self.log_price(scenario, t, t_prime)?;
        let long = self.log_price(scenario, t, maturity)?;
        forward_rate_from_log_prices(short, long, t, t_prime, maturity)
    }
}

/// Deterministic market with `P = 1` before time 1 and `P_t^T = exp(T^2 - t^2)`
/// afterwards. No deflator exists.
pub fn build_dir_violation_market() -> MarketModel {
    MarketModel::new("dir-violation", Structure::DirViolation, DeflatorSpec::Absent)
}

/// Deterministic market `P_t^T = min{1, exp(1 - (T - t))}` with deflator `exp(-t)`.
pub fn build_min_exp_market() -> MarketModel {
    MarketModel::new(
        "min-exp",
        Structure::MinExp,
        DeflatorSpec::Deterministic {
            linear: -1.0,
            quadratic: 0.0,
        },
    )
}

/// Market generated by a deterministic savings account under `Q = P`, so
/// `P_t^T = B_t / B_T` and `Y = 1/B`.
pub fn build_deterministic_emm_market(spec: SavingsAccountSpec) -> Result<MarketModel> {
    let (id, quadratic) = match spec {
        SavingsAccountSpec::ExpNegTSquared => ("exp-neg-t-squared", 1.0),
        SavingsAccountSpec::ExpTSquared => ("exp-t-squared", -1.0),
        SavingsAccountSpec::ShortRateIntegral => {
            return domain("short-rate savings account is stochastic; use market_from_vasicek")
        }
    };
    Ok(MarketModel::new(
        id,
        Structure::Emm(spec),
        DeflatorSpec::Deterministic {
            linear: 0.0,
            quadratic,
        },
    ))
}

/// Flat curve `P_t^T = exp(-rate (T - t))` with deflator `exp(-rate t)`.
pub fn build_flat_market(rate: f64) -> Result<MarketModel> {
    if !rate.is_finite() {
        return domain(format!("flat rate must be finite, got {rate}"));
    }
    Ok(MarketModel::new(
        "flat",
        Structure::Flat { rate },
        DeflatorSpec::Deterministic {
            linear: -rate,
            quadratic: 0.0,
        },
    ))
}

/// Vasicek market with `Q = P`: closed-form prices from the simulated short
/// rate and deflator `Y = 1/B`.
pub fn market_from_vasicek(params: VasicekParams, ensemble: ScenarioEnsemble) -> Result<MarketModel> {
    if ensemble.params() != params || ensemble.start_rate != params.r0 {
        return Err(Error::Precondition(
            "ensemble was not generated from these parameters".into(),
        ));
    }
    Ok(MarketModel::new(
        "vasicek",
        Structure::Vasicek(Arc::new(ensemble)),
        DeflatorSpec::SavingsAccount,
    ))
}
