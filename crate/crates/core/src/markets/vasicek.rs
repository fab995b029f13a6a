//! Vasicek short rate `dr = (b - r) dt + sqrt(2) dW`, its closed-form yield, and
//! exact-transition path simulation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Vasicek parameters with mean-reversion speed 1 and volatility `sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VasicekParams {
    pub r0: f64,
    pub b: f64,
}

impl VasicekParams {
    pub fn new(r0: f64, b: f64) -> Result<Self> {
        if !r0.is_finite() || !b.is_finite() {
            return domain(format!("Vasicek parameters must be finite, got r0={r0}, b={b}"));
        }
        Ok(Self { r0, b })
    }

    /// Mean of `r_{u+h}` given `r_u`.
    pub fn conditional_mean(&self, r: f64, h: f64) -> f64 {
        let decay = (-h).exp();
        decay * r + (1.0 - decay) * self.b
    }

    /// Variance of `r_{u+h}` given `r_u`.
    pub fn conditional_variance(&self, h: f64) -> f64 {
        -(-2.0 * h).exp_m1()
    }
}

/// Log bond price `-tau * R` for time to maturity `tau` and short rate `r`.
pub fn vasicek_log_price(r: f64, tau: f64, b: f64) -> f64 {
    if tau == 0.0 {
        return 0.0;
    }
    let duration = -(-tau).exp_m1();
    -(duration * r + 0.5 * duration * duration + (b - 1.0) * (tau - duration))
}

/// Closed-form Vasicek yield `R_t^T` given the short rate at `t`.
pub fn vasicek_yield(r_t: f64, t: f64, maturity: f64, b: f64) -> Result<f64> {
    if !(maturity > t) || !t.is_finite() || !maturity.is_finite() {
        return domain(format!("maturity {maturity} must exceed time {t}"));
    }
    let tau = maturity - t;
    let duration = -(-tau).exp_m1();
    let ratio = duration / tau;
    Ok(ratio * r_t + duration * duration / (2.0 * tau) + (b - 1.0) * (1.0 - ratio))
}

/// Strictly increasing simulation times starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        match points.first() {
            None => return domain("time grid is empty"),
            Some(&first) if first != 0.0 => {
                return domain(format!("time grid must start at 0, starts at {first}"))
            }
            _ => {}
        }
        if points.iter().any(|p| !p.is_finite()) {
            return domain("time grid contains non-finite points");
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return domain("time grid must be strictly increasing");
        }
        Ok(Self { points })
    }

    /// `0, h, 2h, ...` up to the first multiple of `step` at or beyond `horizon`.
    pub fn uniform(horizon: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() || !(horizon >= 0.0) || !horizon.is_finite() {
            return domain(format!("invalid uniform grid: horizon={horizon}, step={step}"));
        }
        let n = (horizon / step - 1e-9).ceil().max(0.0) as usize;
        Self::new((0..=n).map(|i| i as f64 * step).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().expect("grid is nonempty")
    }

    /// Index of `t` on the grid. Off-grid times are rejected, never interpolated.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        let i = self.points.partition_point(|&p| p < t - tol);
        match self.points.get(i) {
            Some(&p) if (p - t).abs() <= tol => Ok(i),
            _ => domain(format!("time {t} is not on the simulation grid")),
        }
    }

    /// Grid with the midpoint of every interval inserted.
    pub fn refined(&self) -> Self {
        let mut points = Vec::with_capacity(2 * self.points.len() - 1);
        for w in self.points.windows(2) {
            points.push(w[0]);
            points.push(0.5 * (w[0] + w[1]));
        }
        points.push(self.horizon());
        Self { points }
    }
}

/// Seeded Monte Carlo paths of the short rate and its running integral.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEnsemble {
    pub(crate) params: VasicekParams,
    pub(crate) start_rate: f64,
    pub(crate) grid: TimeGrid,
    pub(crate) master_seed: u64,
    pub(crate) short_rate: Vec<Vec<f64>>,
    pub(crate) integrated_rate: Vec<Vec<f64>>,
}

impl ScenarioEnsemble {
    pub fn params(&self) -> VasicekParams {
        self.params
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn n_paths(&self) -> usize {
        self.short_rate.len()
    }

    pub fn short_rate(&self, path: usize) -> &[f64] {
        &self.short_rate[path]
    }

    pub fn integrated_rate(&self, path: usize) -> &[f64] {
        &self.integrated_rate[path]
    }

    /// Short rates of all paths at grid index `idx`.
    pub fn rates_at(&self, idx: usize) -> Vec<f64> {
        self.short_rate.iter().map(|p| p[idx]).collect()
    }

    /// Keeps every `factor`-th grid point and re-accumulates the trapezoid on
    /// the coarser grid. The transitions are exact, so the result is a valid
    /// sample of the coarse-grid ensemble sharing the same Brownian paths.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || (self.grid.len() - 1) % factor != 0 {
            return domain(format!(
                "cannot coarsen a grid of {} intervals by {factor}",
                self.grid.len() - 1
            ));
        }
        let keep = |v: &[f64]| v.iter().step_by(factor).copied().collect::<Vec<_>>();
        let grid = TimeGrid::new(keep(self.grid.points()))?;
        let short_rate: Vec<Vec<f64>> = self.short_rate.iter().map(|p| keep(p)).collect();
        let integrated_rate = short_rate
            .iter()
            .map(|r| trapezoid(grid.points(), r))
            .collect();
        Ok(Self {
            grid,
            short_rate,
            integrated_rate,
            ..self.clone()
        })
    }
}

fn trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    acc.push(0.0);
    for i in 1..values.len() {
        sum += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
        acc.push(sum);
    }
    acc
}

/// Random stream of path `path` under `master_seed`. Each path owns a distinct
/// ChaCha stream, so its draws do not depend on how paths are scheduled.
pub(crate) fn path_rng(master_seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path as u64);
    rng
}

pub(crate) fn simulate_from(
    params: VasicekParams,
    start_rate: f64,
    grid: &TimeGrid,
    n_paths: usize,
    master_seed: u64,
) -> Result<ScenarioEnsemble> {
    if n_paths == 0 {
        return domain("n_paths must be at least 1");
    }
    if !start_rate.is_finite() {
        return domain(format!("start rate must be finite, got {start_rate}"));
    }
    let times = grid.points();
    let steps: Vec<(f64, f64, f64)> = times
        .windows(2)
        .map(|w| {
            let h = w[1] - w[0];
            ((-h).exp(), params.conditional_variance(h).sqrt(), h)
        })
        .collect();

    let paths: Vec<(Vec<f64>, Vec<f64>)> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(master_seed, path);
            let mut rates = Vec::with_capacity(times.len());
            let mut integral = Vec::with_capacity(times.len());
            let (mut r, mut acc) = (start_rate, 0.0);
            rates.push(r);
            integral.push(acc);
            for &(decay, sd, h) in &steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                let next = decay * r + (1.0 - decay) * params.b + sd * z;
                acc += 0.5 * (r + next) * h;
                r = next;
                rates.push(r);
                integral.push(acc);
            }
            (rates, integral)
        })
        .collect();

    let (short_rate, integrated_rate) = paths.into_iter().unzip();
    Ok(ScenarioEnsemble {
        params,
        start_rate,
        grid: grid.clone(),
        master_seed,
        short_rate,
        integrated_rate,
    })
}

/// Simulates `n_paths` Vasicek paths on `grid` from `r0` using exact
/// Ornstein-Uhlenbeck transitions; the integral is the trapezoid on the grid.
pub fn simulate_vasicek(
    params: VasicekParams,
    grid: &TimeGrid,
    n_paths: usize,
    master_seed: u64,
) -> Result<ScenarioEnsemble> {
    simulate_from(params, params.r0, grid, n_paths, master_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![]).is_err());
        assert!(TimeGrid::new(vec![0.5, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 2.0, 1.0]).is_err());
        let g = TimeGrid::uniform(2.0, 1.0 / 64.0).unwrap();
        assert_eq!(g.len(), 129);
        assert_eq!(g.index_of(1.0).unwrap(), 64);
        assert!(g.index_of(1.001).is_err());
        assert_eq!(g.refined().len(), 257);
    }

    #[test]
    fn degenerate_grid() {
        let p = VasicekParams::new(0.7, 1.5).unwrap();
        let e = simulate_vasicek(p, &TimeGrid::new(vec![0.0]).unwrap(), 5, 1).unwrap();
        for i in 0..5 {
            assert_eq!(e.short_rate(i), &[0.7]);
            assert_eq!(e.integrated_rate(i), &[0.0]);
        }
    }

    #[test]
    fn rejects_zero_paths() {
        let p = VasicekParams::new(0.7, 1.5).unwrap();
        let g = TimeGrid::uniform(1.0, 0.25).unwrap();
        assert!(simulate_vasicek(p, &g, 0, 1).is_err());
        assert!(VasicekParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn yield_limits() {
        let (r, b) = (0.3, 1.5);
        let y = vasicek_yield(r, 0.0, 1e6, b).unwrap();
        assert_abs_diff_eq!(y, b - 1.0, epsilon = 1e-4);
        let tau = 1e5;
        let y = vasicek_yield(r, 2.0, 2.0 + tau, b).unwrap();
        assert_abs_diff_eq!(tau * (y - (b - 1.0)), r - b + 1.5, epsilon = 1e-3);
        let y = vasicek_yield(r, 1.0, 1.0 + 1e-8, b).unwrap();
        assert_abs_diff_eq!(y, r, epsilon = 1e-6);
        assert!(vasicek_yield(r, 1.0, 1.0, b).is_err());
    }

    #[test]
    fn log_price_matches_yield() {
        for &(r, tau, b) in &[(0.2, 0.5, 1.0), (-1.0, 30.0, 0.0), (2.0, 800.0, 1.5)] {
            let y = vasicek_yield(r, 0.0, tau, b).unwrap();
            let lp = vasicek_log_price(r, tau, b);
            assert!((lp + tau * y).abs() <= 1e-12 * lp.abs().max(1.0));
        }
    }

    #[test]
    fn mean_reverting_from_b_stays_at_b() {
        let p = VasicekParams::new(1.5, 1.5).unwrap();
        let g = TimeGrid::uniform(2.0, 1.0 / 64.0).unwrap();
        let e = simulate_vasicek(p, &g, 10_000, 7).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let (m, v) = mean_var(&e.rates_at(g.index_of(t).unwrap()));
            let se = (v / 10_000.0).sqrt();
            assert!((m - 1.5).abs() <= 4.0 * se, "t={t}: mean {m}, se {se}");
        }
    }

    #[test]
    fn coarsen_keeps_shared_points() {
        let p = VasicekParams::new(1.0, 1.5).unwrap();
        let g = TimeGrid::uniform(1.0, 0.125).unwrap();
        let e = simulate_vasicek(p, &g, 3, 11).unwrap();
        let c = e.coarsen(2).unwrap();
        assert_eq!(c.grid().points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(c.short_rate(1)[2], e.short_rate(1)[4]);
        assert_eq!(c.integrated_rate(0)[0], 0.0);
        assert!(e.coarsen(3).is_err());
    }

    #[test]
    fn paths_are_order_independent() {
        let p = VasicekParams::new(1.0, 1.5).unwrap();
        let g = TimeGrid::uniform(1.0, 0.25).unwrap();
        let small = simulate_vasicek(p, &g, 4, 99).unwrap();
        let large = simulate_vasicek(p, &g, 40, 99).unwrap();
        for i in 0..4 {
            assert_eq!(small.short_rate(i), large.short_rate(i));
        }
        assert_ne!(small.short_rate(0), small.short_rate(1));
    }
}
