//! Numerical laboratory for long-maturity yield and forward-rate asymptotics.
//!
//! The crate is organised bottom-up:
//!
//! * [`term_structure`]: conversions among bond prices, yields and forward rates.
//! * [`markets`]: the deterministic example markets and an exactly simulated
//!   Vasicek market, all exposing log bond prices and an optional deflator.
//! * [`deflators`]: statistical and exact checks that a declared deflator turns
//!   bond prices into supermartingales, plus the Markov tail bound.
//! * [`asymptotics`]: empirical tail probabilities, quantiles and
//!   bounded-in-probability verdicts over maturity grids.
//! * [`dir_checks`]: the yield/forward domination experiments and the
//!   short-bond arbitrage construction.
//! * [`io`]: CSV serialisation shared by the experiment runner.

pub mod asymptotics;
pub mod deflators;
pub mod dir_checks;
mod error;
pub mod io;
pub mod markets;
pub mod term_structure;

pub use asymptotics::{
    BoundednessVerdict, Direction, Rate, StatisticFamily, TailQuantileCurve, Verdict,
    VerdictParams,
};
pub use deflators::{DeflatorCheck, DeflatorReport, MarkovTailRow};
pub use dir_checks::{ArbitrageCertificate, DirExperimentReport, MaturityGrid};
pub use error::{Error, Result};
pub use markets::{
    Character, DeflatorSpec, MarketModel, SavingsAccountSpec, ScenarioEnsemble, TimeGrid,
    VasicekParams,
};
pub use term_structure::{BondPrice, ForwardRate, TimePoint, Yield};
