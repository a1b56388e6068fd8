//! Valuation of stock loans when the borrower cannot trade the collateral.
//!
//! A stock loan hands the bank one share worth `V0` against a cash amount
//! `L`; the borrower may redeem the share at any time by repaying the
//! principal accrued at the loan rate.  The embedded repayment option is an
//! American-style claim which the borrower, restricted to trading a
//! correlated market portfolio, values by exponential-utility indifference.
//! The bank hedges the resulting barrier-type claim in the full market, and
//! the upfront fee closes the triangle `c = L + C - V0`.
//!
//! The crate is organised around two regimes:
//!
//! * [`perpetual`] — infinite maturity with the loan rate pinned to the
//!   risk-free rate.  The exercise threshold solves a scalar transcendental
//!   equation and everything else is in closed form.
//! * [`finite`] — finite maturity.  The indifference problem becomes a
//!   one-dimensional parabolic linear complementarity problem, solved by the
//!   θ-scheme + projected SOR engine in [`lcp`]; the bank's hedging cost then
//!   solves a Black–Scholes PDE on the domain cut out by the borrower's
//!   exercise boundary.
//!
//! [`oracle`] holds slow, independent validators (Monte Carlo barrier
//! pricing, a binomial stopping tree, closed-form European values) used to
//! cross-check both regimes.

pub mod error;
pub mod finite;
pub mod lcp;
pub mod model;
pub mod oracle;
pub mod perpetual;
pub mod quote;

pub use error::{Error, Result};
pub use finite::{ExerciseBoundary, ObstacleSpec, SolverConfig, SweepAxis, SweepRow, SweepTable};
pub use lcp::{Grid, GridSpacing, LcpProblem, LcpSolution, PsorParams, Scheme};
pub use model::{CollateralModel, Horizon, LoanTerms, MarketModel, RiskPreference};
pub use oracle::PathConfig;
pub use perpetual::PerpetualSolution;
pub use quote::{Boundary, Diagnostics, FeeBranch, FeeQuote, ValuationMethod};
