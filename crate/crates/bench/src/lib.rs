//! Shared fixtures for the benchmarks.

use dirlab_core::markets::{market_from_vasicek, simulate_vasicek};
use dirlab_core::{MarketModel, MaturityGrid, TimeGrid, VasicekParams};

pub const SEED: u64 = 42;

pub fn params() -> VasicekParams {
    VasicekParams::new(1.0, 1.5).expect("valid parameters")
}

/// Vasicek market simulated to `horizon` with step 1/64.
pub fn vasicek_market(horizon: f64, n_paths: usize) -> MarketModel {
    let grid = TimeGrid::uniform(horizon, 1.0 / 64.0).expect("valid grid");
    let ensemble = simulate_vasicek(params(), &grid, n_paths, SEED).expect("simulation");
    market_from_vasicek(params(), ensemble).expect("matching parameters")
}

/// Doubling grid 25, 50, ..., 800.
pub fn maturity_grid() -> Vec<f64> {
    MaturityGrid::new(25.0, 2.0, 6).expect("valid grid").points()
}
