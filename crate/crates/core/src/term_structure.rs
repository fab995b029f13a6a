//! Conversions among zero-coupon bond prices, yields and forward rates.
//!
//! All rates are continuously compounded. The log-space helpers
//! ([`yield_from_log_price`], [`forward_rate_from_log_prices`]) are the
//! primitives used by the market models, since several example markets have
//! prices far outside the range of `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A point in time, in years.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TimePoint(f64);

impl TimePoint {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return domain(format!("time point must be finite and nonnegative, got {value}"));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Price at time t of a bond paying one unit at maturity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct BondPrice(f64);

impl BondPrice {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return domain(format!("bond price must be finite and positive, got {value}"));
        }
        Ok(Self(value))
    }

    /// Materialises a price from its logarithm, failing when `exp` over- or underflows.
    pub fn from_log(log_price: f64) -> Result<Self> {
        Self::new(log_price.exp())
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Continuously compounded yield, 1/years. Negative values are allowed.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Yield(f64);

impl Yield {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return domain(format!("yield must be finite, got {value}"));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Forward rate set at `t` for investment over `[t', T]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ForwardRate(f64);

impl ForwardRate {
    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_horizon(t: f64, maturity: f64) -> Result<f64> {
    if !(maturity > t) || !t.is_finite() || !maturity.is_finite() {
        return domain(format!("maturity {maturity} must exceed time {t}"));
    }
    Ok(maturity - t)
}

fn check_forward_ordering(t: f64, t_prime: f64, maturity: f64) -> Result<()> {
    if !(t < t_prime && t_prime < maturity) || !maturity.is_finite() || !t.is_finite() {
        return domain(format!(
            "forward rate needs t < t' < T, got t={t}, t'={t_prime}, T={maturity}"
        ));
    }
    Ok(())
}

/// `R_t^T = -log(P_t^T) / (T - t)`.
pub fn yield_from_log_price(log_price: f64, t: f64, maturity: f64) -> Result<f64> {
    let tau = check_horizon(t, maturity)?;
    if !log_price.is_finite() {
        return domain(format!("log price must be finite, got {log_price}"));
    }
    Ok(-log_price / tau)
}

pub fn yield_from_price(price: BondPrice, t: TimePoint, maturity: TimePoint) -> Result<Yield> {
    BondPrice::new(price.0)?;
    Yield::new(yield_from_log_price(price.0.ln(), t.0, maturity.0)?)
}

pub fn price_from_yield(y: Yield, t: TimePoint, maturity: TimePoint) -> Result<BondPrice> {
    let tau = check_horizon(t.0, maturity.0)?;
    BondPrice::from_log(-y.0 * tau)
}

/// `F_{t,t'}^T = log(P_t^{t'} / P_t^T) / (T - t')` from the two log prices.
pub fn forward_rate_from_log_prices(
    log_short: f64,
    log_long: f64,
    t: f64,
    t_prime: f64,
    maturity: f64,
) -> Result<f64> {
    check_forward_ordering(t, t_prime, maturity)?;
    Ok((log_short - log_long) / (maturity - t_prime))
}

pub fn forward_rate_from_prices(
    p_short: BondPrice,
    p_long: BondPrice,
    t: TimePoint,
    t_prime: TimePoint,
    maturity: TimePoint,
) -> Result<ForwardRate> {
    BondPrice::new(p_short.0)?;
    BondPrice::new(p_long.0)?;
    forward_rate_from_log_prices(p_short.0.ln(), p_long.0.ln(), t.0, t_prime.0, maturity.0)
        .map(ForwardRate)
}

/// The yield-weighted form `((T-t) R_t^T - (t'-t) R_t^{t'}) / (T-t')`.
pub fn forward_rate_from_yields(
    r_long: Yield,
    r_short: Yield,
    t: TimePoint,
    t_prime: TimePoint,
    maturity: TimePoint,
) -> Result<ForwardRate> {
    let (t, tp, m) = (t.0, t_prime.0, maturity.0);
    check_forward_ordering(t, tp, m)?;
    let span = m - tp;
    Ok(ForwardRate(
        (m - t) / span * r_long.0 - (tp - t) / span * r_short.0,
    ))
}

/// Residual of `(T-t')(F - R_t^T) = (t'-t)(R_t^T - R_t^{t'})`, relative to the
/// largest term involved. Zero up to rounding for consistent inputs.
pub fn forward_yield_identity_residual(
    forward: f64,
    r_long: f64,
    r_short: f64,
    t: f64,
    t_prime: f64,
    maturity: f64,
) -> f64 {
    let lhs = (maturity - t_prime) * (forward - r_long);
    let rhs = (t_prime - t) * (r_long - r_short);
    let scale = [
        (maturity - t_prime) * forward,
        (maturity - t_prime) * r_long,
        (t_prime - t) * r_long,
        (t_prime - t) * r_short,
    ]
    .iter()
    .fold(f64::MIN_POSITIVE, |acc, v| acc.max(v.abs()));
    (lhs - rhs).abs() / scale
}
