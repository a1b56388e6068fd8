//! Error type shared by every solver in the crate.

use thiserror::Error;

/// Errors produced by model validation and the numerical solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter violates its documented range.
    #[error("invalid parameter {name} = {value}: must satisfy {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// Perpetual formulas require the loan rate to equal the risk-free rate.
    #[error("perpetual valuation requires alpha = r (alpha = {alpha}, r = {r})")]
    AlphaMismatch { alpha: f64, r: f64 },

    /// An operation was called with the wrong horizon kind.
    #[error("horizon mismatch: {0}")]
    HorizonMismatch(&'static str),

    /// The threshold root-finder ran out of iterations.
    #[error("threshold solve did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    /// gamma * (1 - rho^2) is numerically zero; the incomplete-market
    /// formulas degenerate and the complete-market limit applies instead.
    #[error("gamma*(1-rho^2) = {k:.3e} is below {min:.1e}; use the complete-market formulas")]
    DegenerateRiskAversion { k: f64, min: f64 },

    /// Grid construction rejected its inputs.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// An LCP problem definition is inconsistent on the supplied grid.
    #[error("invalid LCP problem: {0}")]
    InvalidProblem(String),

    /// Projected SOR failed to reach tolerance within the sweep budget.
    #[error(
        "PSOR exceeded {max_iter} sweeps at time step {step} (residual {residual:.3e}, tol {tol:.3e})"
    )]
    PsorDivergence {
        step: usize,
        max_iter: usize,
        residual: f64,
        tol: f64,
    },

    /// The exercise boundary handed to the bank-cost PDE is unusable.
    #[error("invalid exercise boundary: {0}")]
    InvalidBoundary(String),

    /// The computed fee is negative beyond what grid error can explain.
    #[error("computed fee {fee} is negative beyond the grid tolerance {tol}")]
    NegativeFee { fee: f64, tol: f64 },

    /// The binomial stopping tree needs a minimum number of steps.
    #[error("binomial tree requires at least {min} steps (got {given})")]
    StepCountTooSmall { given: usize, min: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
