//! Benchmark-only crate; see `benches/solvers.rs`.
//!
//! Shared fixtures for the benchmark targets live here so that every
//! benchmark prices the same loans.

use stockloan_core::{CollateralModel, Horizon, LoanTerms, MarketModel, RiskPreference};

/// Market used by every benchmark.
pub fn market() -> MarketModel {
    MarketModel::new(0.05, 0.10, 0.2).unwrap()
}

/// Dividend-paying collateral from the perpetual examples.
pub fn quiet_collateral() -> CollateralModel {
    CollateralModel::new(&market(), 0.15, 0.05, 0.9).unwrap()
}

/// Volatile, weakly correlated collateral from the finite examples.
pub fn rough_collateral() -> CollateralModel {
    CollateralModel::new(&market(), 0.4, 0.05, 0.4).unwrap()
}

pub fn perpetual_loan() -> LoanTerms {
    LoanTerms::new(90.0, 0.05, 100.0, Horizon::Perpetual).unwrap()
}

pub fn finite_loan() -> LoanTerms {
    LoanTerms::new(100.0, 0.07, 100.0, Horizon::Finite { maturity: 5.0 }).unwrap()
}

pub fn preference() -> RiskPreference {
    RiskPreference::new(0.01).unwrap()
}
