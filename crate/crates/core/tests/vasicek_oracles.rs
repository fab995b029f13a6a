//! Simulation and closed-form pricing checked against brute-force oracles.

use dirlab_core::markets::{simulate_vasicek, vasicek_yield, TimeGrid, VasicekParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Euler-Maruyama on a fine step, used only as an independent reference.
fn euler_sample(p: VasicekParams, horizon: f64, steps: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = horizon / steps as f64;
    let vol = (2.0 * h).sqrt();
    (0..n)
        .map(|_| {
            let mut r = p.r0;
            for _ in 0..steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                r += (p.b - r) * h + vol * z;
            }
            r
        })
        .collect()
}

fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn exact_transitions_match_fine_euler_in_law() {
    let p = VasicekParams::new(1.0, 1.5).unwrap();
    let n = 10_000;
    let e = simulate_vasicek(p, &TimeGrid::uniform(1.0, 0.25).unwrap(), n, 11).unwrap();
    let exact = e.rates_at(e.grid().len() - 1);
    let reference = euler_sample(p, 1.0, 1000, n, 12);
    let d = ks_statistic(&exact, &reference);
    // Two-sample Kolmogorov-Smirnov critical value at the 1% level.
    let critical = 1.628 * ((2 * n) as f64 / (n * n) as f64).sqrt();
    assert!(d < critical, "KS distance {d} vs critical {critical}");
}

#[test]
fn marginal_variance_matches_ou_law() {
    let p = VasicekParams::new(-0.5, 2.0).unwrap();
    let e = simulate_vasicek(p, &TimeGrid::uniform(2.0, 0.5).unwrap(), 100_000, 5).unwrap();
    for (k, &t) in e.grid().points().iter().enumerate().skip(1) {
        let x = e.rates_at(k);
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = 1.0 - (-2.0 * t).exp();
        assert!((var / target - 1.0).abs() < 0.05, "t={t}: {var} vs {target}");
    }
}

#[test]
fn trapezoid_mean_error_shrinks_quadratically() {
    // A large gap r0 - b makes the deterministic part of the quadrature error
    // dominate the Brownian part, which is only first order pathwise.
    let p = VasicekParams::new(51.0, 1.0).unwrap();
    let fine = simulate_vasicek(p, &TimeGrid::uniform(1.0, 1.0 / 64.0).unwrap(), 100_000, 23).unwrap();
    let mean_integral = |factor: usize| {
        let e = if factor == 1 { fine.clone() } else { fine.coarsen(factor).unwrap() };
        let last = e.grid().len() - 1;
        (0..e.n_paths()).map(|i| e.integrated_rate(i)[last]).sum::<f64>() / e.n_paths() as f64
    };
    let m: Vec<f64> = [8, 4, 2, 1].iter().map(|&f| mean_integral(f)).collect();
    let changes: Vec<f64> = m.windows(2).map(|w| w[0] - w[1]).collect();
    for pair in changes.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((ratio - 4.0).abs() <= 0.5, "ratio {ratio} from changes {changes:?}");
    }
}

/// RK4 on the affine system `B' = 1 - B`, `A' = B^2 - b B` with
/// `P = exp(A - B r)`, integrated from maturity backwards in `tau`.
fn affine_ode_yield(r: f64, tau: f64, b: f64) -> f64 {
    let steps = ((tau / 1e-3).ceil() as usize).max(100);
    let h = tau / steps as f64;
    let f = |_: f64, (_, bb): (f64, f64)| (bb * bb - b * bb, 1.0 - bb);
    let (mut a, mut bb) = (0.0f64, 0.0f64);
    for k in 0..steps {
        let x = k as f64 * h;
        let k1 = f(x, (a, bb));
        let k2 = f(x + h / 2.0, (a + h / 2.0 * k1.0, bb + h / 2.0 * k1.1));
        let k3 = f(x + h / 2.0, (a + h / 2.0 * k2.0, bb + h / 2.0 * k2.1));
        let k4 = f(x + h, (a + h * k3.0, bb + h * k3.1));
        a += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        bb += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    -(a - bb * r) / tau
}

#[test]
fn closed_form_yield_matches_ode_quadrature() {
    for r in [-1.0, 0.0, 1.5] {
        for b in [0.0, 1.5] {
            for tau in [0.1, 1.0, 10.0, 100.0] {
                let closed = vasicek_yield(r, 0.0, tau, b).unwrap();
                let oracle = affine_ode_yield(r, tau, b);
                assert!((closed - oracle).abs() <= 1e-8, "r={r} b={b} tau={tau}: {closed} vs {oracle}");
            }
        }
    }
}

#[test]
fn yield_long_maturity_limits() {
    for r in [-1.0, 0.0, 1.5] {
        for b in [0.0, 1.5] {
            // The gap to the long rate is (r - b + 3/2) / tau once exp(-tau) vanishes.
            for tau in [100.0, 1e3, 1e4] {
                let y = vasicek_yield(r, 2.0, 2.0 + tau, b).unwrap();
                let gap = (r - b + 1.5) / tau;
                assert!((y - (b - 1.0) - gap).abs() <= 1e-13, "r={r} b={b} tau={tau}: {y}");
            }
            let tau = 1e5;
            let y = vasicek_yield(r, 0.0, tau, b).unwrap();
            assert!((tau * (y - (b - 1.0)) - (r - b + 1.5)).abs() <= 1e-3);
        }
    }
}
