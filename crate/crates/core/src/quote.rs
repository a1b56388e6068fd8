//! Fee quotes and the diagnostics needed to audit them.

use serde::Serialize;

use crate::finite::ExerciseBoundary;

/// Which exercise rule backs a quote: a scalar threshold (perpetual) or a
/// time-dependent boundary curve (finite maturity).
#[derive(Debug, Clone, Serialize)]
pub enum Boundary {
    Threshold(f64),
    Curve(ExerciseBoundary),
}

impl Boundary {
    /// Boundary level at inception.
    pub fn level_at_start(&self) -> f64 {
        match self {
            Boundary::Threshold(v) => *v,
            Boundary::Curve(b) => b.levels.first().copied().unwrap_or(f64::INFINITY),
        }
    }
}

/// Which branch of the fee relation produced the quote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeeBranch {
    /// `v0` below the exercise level: the barrier formula / PDE fired.
    Continuation,
    /// `v0` at or above the exercise level: fee is exactly zero.
    ImmediateExercise,
}

/// How the numbers were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ValuationMethod {
    PerpetualClosedForm,
    CompleteMarketLimit,
    FiniteDifference,
}

/// Solver metadata attached to every quote so that each number in a report
/// can be traced back to the regime and iteration counts that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub method: ValuationMethod,
    pub branch: FeeBranch,
    /// Root-finder iterations (perpetual) — zero for finite solves.
    pub iterations: usize,
    /// Threshold-equation residual at the returned root.
    pub residual: f64,
    /// Largest PSOR sweep count over all time steps (finite only).
    pub psor_max_iterations: usize,
    /// Largest complementarity residual over all nodes (finite only).
    pub psor_max_residual: f64,
    /// Fee before the clamp to zero, when a small negative value was
    /// attributable to grid error.  `None` when no clamp fired.
    pub raw_fee: Option<f64>,
}

impl Diagnostics {
    pub fn clamped(&self) -> bool {
        self.raw_fee.is_some()
    }
}

/// A priced loan: fee, bank hedging cost, borrower indifference value at
/// inception, the exercise rule, and solver diagnostics.
///
/// `fee = principal + bank_cost - v0` holds exactly except when a small
/// negative value was clamped to zero, in which case `diagnostics.raw_fee`
/// retains the unclamped number.
#[derive(Debug, Clone, Serialize)]
pub struct FeeQuote {
    pub fee: f64,
    pub bank_cost: f64,
    /// Indifference value of the repayment option at inception.
    pub p0: f64,
    pub boundary: Boundary,
    pub diagnostics: Diagnostics,
}
