//! Finite-sample surrogates for boundedness in probability and `plimsup`.
//!
//! A [`StatisticFamily`] holds paired samples of `xi^T` over a maturity grid.
//! [`op_bound_verdict`] classifies the family as bounded, unbounded or
//! inconclusive from the tail of its quantile curve. Quantiles use the lower
//! order statistic `x_(ceil(q n))` without interpolation, which keeps the
//! paired-sample counting bounds exact.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Minimum number of maturities for a verdict.
pub const MIN_GRID_POINTS: usize = 6;

/// Caveat attached to every verdict.
pub const VERDICT_CAVEAT: &str =
    "finite-grid heuristic: thresholds are engineering choices, not a proof of (un)boundedness";

/// `p_hat = #{x_i > level} / n` and its binomial standard error.
pub fn empirical_tail_prob(sample: &[f64], level: f64) -> Result<(f64, f64)> {
    if sample.is_empty() {
        return domain("tail probability of an empty sample");
    }
    let n = sample.len() as f64;
    let p = sample.iter().filter(|&&x| x > level).count() as f64 / n;
    Ok((p, (p * (1.0 - p) / n).sqrt()))
}

fn check_level(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return domain(format!("quantile level must lie in (0, 1), got {q}"));
    }
    Ok(())
}

/// 1-based rank `ceil(q n)`, clamped to `[1, n]`.
fn rank(q: f64, n: usize) -> usize {
    let raw = (q * n as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n)
}

fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    sorted[rank(q, sorted.len()) - 1]
}

/// Distribution-free standard error of the `q`-quantile: half the spread of
/// the order statistics one binomial standard deviation either side.
fn sorted_quantile_se(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n < 2 {
        return 0.0;
    }
    let m = (q * (1.0 - q) / n as f64).sqrt();
    let lo = sorted[rank((q - m).max(1e-12), n) - 1];
    let hi = sorted[rank((q + m).min(1.0), n) - 1];
    0.5 * (hi - lo)
}

fn sorted_copy(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// The `ceil(q n)`-th order statistic of `sample`.
pub fn empirical_quantile(sample: &[f64], q: f64) -> Result<f64> {
    check_level(q)?;
    if sample.is_empty() {
        return domain("quantile of an empty sample");
    }
    Ok(sorted_quantile(&sorted_copy(sample), q))
}

pub fn quantile_standard_error(sample: &[f64], q: f64) -> Result<f64> {
    check_level(q)?;
    if sample.is_empty() {
        return domain("quantile of an empty sample");
    }
    Ok(sorted_quantile_se(&sorted_copy(sample), q))
}

/// Samples of `xi^T` on a maturity grid, paired by scenario index.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticFamily {
    maturities: Vec<f64>,
    samples: Vec<Vec<f64>>,
}

impl StatisticFamily {
    pub fn new(maturities: Vec<f64>, samples: Vec<Vec<f64>>) -> Result<Self> {
        if maturities.len() != samples.len() {
            return domain("one sample vector per maturity is required");
        }
        if maturities.windows(2).any(|w| w[1] <= w[0]) {
            return domain("maturity grid must be strictly increasing");
        }
        let n = samples.first().map_or(0, Vec::len);
        if n == 0 || samples.iter().any(|s| s.len() != n) {
            return domain("samples must be nonempty and of equal size across maturities");
        }
        if samples.iter().flatten().any(|x| !x.is_finite()) {
            return domain("samples must be finite");
        }
        Ok(Self {
            maturities,
            samples,
        })
    }

    /// Evaluates `f(scenario, T)` for every scenario and maturity.
    pub fn from_fn(
        maturities: &[f64],
        n_scenarios: usize,
        mut f: impl FnMut(usize, f64) -> Result<f64>,
    ) -> Result<Self> {
        let samples = maturities
            .iter()
            .map(|&m| (0..n_scenarios).map(|i| f(i, m)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(maturities.to_vec(), samples)
    }

    pub fn maturities(&self) -> &[f64] {
        &self.maturities
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn n(&self) -> usize {
        self.samples[0].len()
    }

    /// Pointwise `self - other`, keeping the scenario pairing.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.maturities != other.maturities || self.n() != other.n() {
            return domain("families must share maturities and sample size");
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Self::new(self.maturities.clone(), samples)
    }

    /// Multiplies each `xi^T` by `g(T)`.
    pub fn scaled(&self, g: impl Fn(f64) -> f64) -> Result<Self> {
        let samples = self
            .maturities
            .iter()
            .zip(&self.samples)
            .map(|(&m, s)| s.iter().map(|x| g(m) * x).collect())
            .collect();
        Self::new(self.maturities.clone(), samples)
    }
}

/// Normalising sequence `alpha^T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rate {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "1/T")]
    InverseT,
    #[serde(rename = "1/sqrt(T)")]
    InverseSqrtT,
}

impl Rate {
    pub fn at(self, maturity: f64) -> f64 {
        match self {
            Rate::One => 1.0,
            Rate::InverseT => 1.0 / maturity,
            Rate::InverseSqrtT => 1.0 / maturity.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Above,
    Below,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Bounded,
    Unbounded,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictParams {
    pub delta: f64,
    pub tail_fraction: f64,
    pub slack_factor: f64,
}

impl Default for VerdictParams {
    fn default() -> Self {
        Self {
            delta: 0.05,
            tail_fraction: 0.5,
            slack_factor: 2.0,
        }
    }
}

impl VerdictParams {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        check_level(self.delta)?;
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return domain(format!("tail_fraction must lie in (0, 1], got {}", self.tail_fraction));
        }
        if !(self.slack_factor >= 1.0) || !self.slack_factor.is_finite() {
            return domain(format!("slack_factor must be >= 1, got {}", self.slack_factor));
        }
        Ok(())
    }
}

/// Per-maturity lower and upper quantiles of a statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailQuantileCurve {
    pub delta: f64,
    pub maturities: Vec<f64>,
    /// `q_delta`
    pub lower: Vec<f64>,
    /// `q_{1-delta}`
    pub upper: Vec<f64>,
    pub lower_se: Vec<f64>,
    pub upper_se: Vec<f64>,
    pub mean: Vec<f64>,
    /// Standard error of `mean`.
    pub mean_se: Vec<f64>,
}

pub fn tail_quantile_curve(family: &StatisticFamily, rate: Rate, delta: f64) -> Result<TailQuantileCurve> {
    check_level(delta)?;
    let mut curve = TailQuantileCurve {
        delta,
        maturities: family.maturities.clone(),
        lower: vec![],
        upper: vec![],
        lower_se: vec![],
        upper_se: vec![],
        mean: vec![],
        mean_se: vec![],
    };
    for (&m, sample) in family.maturities.iter().zip(&family.samples) {
        let alpha = rate.at(m);
        if !(alpha > 0.0) || !alpha.is_finite() {
            return domain(format!("rate must be positive at T={m}"));
        }
        let normalised: Vec<f64> = sample.iter().map(|x| x / alpha).collect();
        let sorted = sorted_copy(&normalised);
        curve.lower.push(sorted_quantile(&sorted, delta));
        curve.upper.push(sorted_quantile(&sorted, 1.0 - delta));
        curve.lower_se.push(sorted_quantile_se(&sorted, delta));
        curve.upper_se.push(sorted_quantile_se(&sorted, 1.0 - delta));
        let (mean, se) = mean_and_se(&normalised);
        curve.mean.push(mean);
        curve.mean_se.push(se);
    }
    Ok(curve)
}

/// Sample mean and its standard error (zero for a single observation).
pub fn mean_and_se(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    // Shifting by the first value keeps a constant sample's mean exact.
    let pivot = sample.first().copied().unwrap_or(0.0);
    let mean = pivot + sample.iter().map(|x| x - pivot).sum::<f64>() / n;
    if sample.len() < 2 {
        return (mean, 0.0);
    }
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Unbiased sample variance and its approximate standard error
/// `sqrt((m4 - s^4 (n-3)/(n-1)) / n)`.
pub fn variance_and_se(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    if sample.len() < 4 {
        return (0.0, f64::INFINITY);
    }
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = sample.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let se = ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt();
    (var, se)
}

/// Decision details for one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideSummary {
    pub direction: Direction,
    /// `q_{1-delta}(xi/alpha)` above, `-q_delta(xi/alpha)` below.
    pub scores: Vec<f64>,
    pub score_se: Vec<f64>,
    pub tail_max: f64,
    pub reference: f64,
    pub threshold: f64,
    pub increasing_tail: bool,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessVerdict {
    pub direction: Direction,
    pub rate: Rate,
    pub verdict: Verdict,
    pub params: VerdictParams,
    pub evidence: TailQuantileCurve,
    pub sides: Vec<SideSummary>,
    pub note: String,
}

fn median(values: &[f64]) -> f64 {
    let v = sorted_copy(values);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn tail_start(m: usize, tail_fraction: f64) -> usize {
    let len = ((tail_fraction * m as f64).ceil() as usize).clamp(1, m);
    m - len
}

fn decide_side(curve: &TailQuantileCurve, direction: Direction, params: &VerdictParams) -> SideSummary {
    let (scores, score_se): (Vec<f64>, Vec<f64>) = match direction {
        Direction::Below => (
            curve.lower.iter().map(|q| -q).collect(),
            curve.lower_se.clone(),
        ),
        _ => (curve.upper.clone(), curve.upper_se.clone()),
    };
    let m = scores.len();
    let tail_max = scores[tail_start(m, params.tail_fraction)..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let reference = median(&scores);
    let threshold = params.slack_factor * reference.abs().max(1.0);
    let increasing_tail = (m - 3..m).all(|j| {
        let noise = 4.0 * score_se[j].hypot(score_se[j - 1]);
        scores[j] - scores[j - 1] > noise
    });
    let verdict = if tail_max <= threshold {
        Verdict::Bounded
    } else if increasing_tail {
        Verdict::Unbounded
    } else {
        Verdict::Inconclusive
    };
    SideSummary {
        direction,
        scores,
        score_se,
        tail_max,
        reference,
        threshold,
        increasing_tail,
        verdict,
    }
}

fn combine(a: Verdict, b: Verdict) -> Verdict {
    match (a, b) {
        (Verdict::Bounded, Verdict::Bounded) => Verdict::Bounded,
        (Verdict::Unbounded, _) | (_, Verdict::Unbounded) => Verdict::Unbounded,
        _ => Verdict::Inconclusive,
    }
}

/// Classifies `xi^T / alpha^T` as bounded in probability in `direction`.
pub fn op_bound_verdict(
    family: &StatisticFamily,
    rate: Rate,
    direction: Direction,
    params: VerdictParams,
) -> Result<BoundednessVerdict> {
    params.validate()?;
    if family.maturities.len() < MIN_GRID_POINTS {
        return domain(format!(
            "verdict needs at least {MIN_GRID_POINTS} maturities, got {}",
            family.maturities.len()
        ));
    }
    let evidence = tail_quantile_curve(family, rate, params.delta)?;
    let sides: Vec<SideSummary> = match direction {
        Direction::TwoSided => vec![
            decide_side(&evidence, Direction::Above, &params),
            decide_side(&evidence, Direction::Below, &params),
        ],
        d => vec![decide_side(&evidence, d, &params)],
    };
    let verdict = sides
        .iter()
        .map(|s| s.verdict)
        .reduce(combine)
        .expect("at least one side");
    Ok(BoundednessVerdict {
        direction,
        rate,
        verdict,
        params,
        evidence,
        sides,
        note: VERDICT_CAVEAT.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlimsupBand {
    pub delta: f64,
    /// Max over the tail half of the grid of `q_{1-delta}(xi^T)`.
    pub value: f64,
    /// Quantile standard error at the maximising maturity.
    pub se: f64,
}

pub fn plimsup_band(family: &StatisticFamily, deltas: &[f64]) -> Result<Vec<PlimsupBand>> {
    if family.maturities.len() < MIN_GRID_POINTS {
        return domain(format!(
            "plimsup band needs at least {MIN_GRID_POINTS} maturities, got {}",
            family.maturities.len()
        ));
    }
    deltas
        .iter()
        .map(|&delta| {
            let curve = tail_quantile_curve(family, Rate::One, delta)?;
            let start = tail_start(curve.upper.len(), 0.5);
            let (value, se) = curve.upper[start..]
                .iter()
                .zip(&curve.upper_se[start..])
                .fold((f64::NEG_INFINITY, 0.0), |best, (&q, &se)| {
                    if q > best.0 {
                        (q, se)
                    } else {
                        best
                    }
                });
            Ok(PlimsupBand { delta, value, se })
        })
        .collect()
}
