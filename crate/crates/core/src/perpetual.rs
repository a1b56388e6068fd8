//! Infinite-maturity valuation in closed form.
//!
//! With an open-ended loan and the loan rate pinned to the risk-free rate,
//! the repayment problem is time-homogeneous: the borrower repays the first
//! time the collateral reaches a stationary threshold `V*`, the unique root
//! above the principal of
//!
//! ```text
//!   V* - L = (1/k) * ln(1 + k V* / beta),        k = gamma * (1 - rho^2).
//! ```
//!
//! Everything else follows from `V*`: the borrower's indifference value, the
//! bank's hedging cost `(V* - L) (v / V*)^beta` (the payoff times the
//! probability of ever hitting the threshold), and the fee
//! `c = L + C(v0) - v0`.  As `k -> 0` the formulas collapse to the
//! complete-market values with threshold `beta L / (beta - 1)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{beta, CollateralModel, LoanTerms, MarketModel, RiskPreference};
use crate::quote::{Boundary, Diagnostics, FeeBranch, FeeQuote, ValuationMethod};

/// Below this value of `k = gamma*(1-rho^2)` the incomplete-market formulas
/// are numerically 0/0; callers are routed to the complete-market limit.
pub const K_MIN: f64 = 1e-12;

const MAX_ITER: usize = 200;

/// Solved perpetual exercise rule.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PerpetualSolution {
    /// Exercise threshold, `v_star > principal`.
    pub v_star: f64,
    /// Threshold exponent `1 + 2*delta/sigma2^2`.
    pub beta: f64,
    /// `gamma * (1 - rho^2)`.
    pub k: f64,
    /// Threshold-equation residual at `v_star`.
    pub residual: f64,
    /// Root-finder iterations used.
    pub iterations: usize,
}

fn root_tolerance(principal: f64) -> f64 {
    1e-10 * principal.max(1.0)
}

fn require_perpetual(market: &MarketModel, loan: &LoanTerms) -> Result<()> {
    if !loan.horizon.is_perpetual() {
        return Err(Error::HorizonMismatch(
            "perpetual valuation called with a finite-maturity loan",
        ));
    }
    if (loan.alpha - market.r).abs() > 1e-12 * market.r.abs().max(1.0) {
        return Err(Error::AlphaMismatch {
            alpha: loan.alpha,
            r: market.r,
        });
    }
    Ok(())
}

/// Solves the threshold equation for `V* > L` by bisection-safeguarded
/// Newton on `g(V) = (V - L) - ln(1 + k V / beta) / k`.
///
/// `g` is strictly increasing with `g(L) < 0`, so the root is unique; the
/// bracket keeps Newton honest without any curvature analysis.
pub fn solve_threshold(
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
    pref: &RiskPreference,
) -> Result<PerpetualSolution> {
    require_perpetual(market, loan)?;
    let k = pref.k(collateral);
    if k < K_MIN {
        return Err(Error::DegenerateRiskAversion { k, min: K_MIN });
    }
    let b = beta(collateral);
    let principal = loan.principal;
    let tol = root_tolerance(principal);

    let g = |v: f64| (v - principal) - (k * v / b).ln_1p() / k;
    let g_prime = |v: f64| 1.0 - 1.0 / (b + k * v);

    let mut lo = principal * (1.0 + 1e-9);
    let mut hi = 10.0 * principal;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NonConvergence {
                iterations: MAX_ITER,
            });
        }
    }

    let mut x = 0.5 * (lo + hi);
    let mut iterations = 0;
    let mut gx = g(x);
    while iterations < MAX_ITER {
        iterations += 1;
        if gx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if gx.abs() <= 1e-15 * (x - principal).max(1.0) || hi - lo <= tol {
            break;
        }
        let mut next = x - gx / g_prime(x);
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        x = next;
        gx = g(x);
    }
    let residual = g(x);
    if residual.abs() > tol {
        return Err(Error::NonConvergence { iterations });
    }
    Ok(PerpetualSolution {
        v_star: x,
        beta: b,
        k,
        residual,
        iterations,
    })
}

/// Borrower's indifference value of the repayment option at collateral
/// level `v`.
pub fn indifference_value(v: f64, sol: &PerpetualSolution, loan: &LoanTerms) -> f64 {
    debug_assert!(v >= 0.0);
    if v >= sol.v_star {
        return v - loan.principal;
    }
    let w = (-sol.k * (sol.v_star - loan.principal)).exp_m1() * (v / sol.v_star).powf(sol.beta);
    -w.ln_1p() / sol.k
}

/// Borrower's value function `G(x, v)`: expected utility of wealth `x` plus
/// the optimally exercised repayment option at collateral level `v`.
pub fn value_function_g(
    x: f64,
    v: f64,
    sol: &PerpetualSolution,
    loan: &LoanTerms,
    pref: &RiskPreference,
) -> f64 {
    debug_assert!(v >= 0.0);
    let gamma = pref.gamma;
    if v >= sol.v_star {
        return -(-gamma * (x + v - loan.principal)).exp();
    }
    let w = (-sol.k * (sol.v_star - loan.principal)).exp_m1() * (v / sol.v_star).powf(sol.beta);
    -(-gamma * x).exp() * (1.0 + w).powf(gamma / sol.k)
}

/// Bank's hedging cost of the repayment option exercised at `sol.v_star`:
/// the payoff `V* - L` times the hitting probability `(v / V*)^beta`.
pub fn bank_cost(v: f64, sol: &PerpetualSolution, loan: &LoanTerms) -> f64 {
    debug_assert!(v >= 0.0);
    if v >= sol.v_star {
        v - loan.principal
    } else {
        (sol.v_star - loan.principal) * (v / sol.v_star).powf(sol.beta)
    }
}

/// Fee quote for a perpetual loan: `c = L + C(v0) - v0`, exactly zero when
/// the collateral already sits at or above the threshold.
pub fn fee(
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
    pref: &RiskPreference,
) -> Result<FeeQuote> {
    require_perpetual(market, loan)?;
    if pref.k(collateral) < K_MIN {
        return complete_market_fee(market, collateral, loan);
    }
    let sol = solve_threshold(market, collateral, loan, pref)?;
    let diagnostics = |branch| Diagnostics {
        method: ValuationMethod::PerpetualClosedForm,
        branch,
        iterations: sol.iterations,
        residual: sol.residual,
        psor_max_iterations: 0,
        psor_max_residual: 0.0,
        raw_fee: None,
    };
    if loan.v0 >= sol.v_star {
        return Ok(FeeQuote {
            fee: 0.0,
            bank_cost: loan.v0 - loan.principal,
            p0: loan.v0 - loan.principal,
            boundary: Boundary::Threshold(sol.v_star),
            diagnostics: diagnostics(FeeBranch::ImmediateExercise),
        });
    }
    let cost = bank_cost(loan.v0, &sol, loan);
    Ok(FeeQuote {
        fee: loan.principal + cost - loan.v0,
        bank_cost: cost,
        p0: indifference_value(loan.v0, &sol, loan),
        boundary: Boundary::Threshold(sol.v_star),
        diagnostics: diagnostics(FeeBranch::Continuation),
    })
}

/// Complete-market exercise threshold `beta L / (beta - 1)`; infinite when
/// the collateral pays no dividend (`beta = 1`).
pub fn complete_market_threshold(
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
) -> Result<f64> {
    require_perpetual(market, loan)?;
    let b = beta(collateral);
    if collateral.delta() == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(b / (b - 1.0) * loan.principal)
    }
}

/// Complete-market indifference value at collateral level `v`.  This is
/// also the common limit of the incomplete-market value as `rho^2 -> 1` or
/// `gamma -> 0`.
pub fn complete_market_indifference(
    v: f64,
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
) -> Result<f64> {
    let v_tilde = complete_market_threshold(market, collateral, loan)?;
    if v_tilde.is_infinite() {
        // No-dividend case: the repayment option is worth the collateral.
        return Ok(v);
    }
    if v >= v_tilde {
        Ok(v - loan.principal)
    } else {
        Ok((v_tilde - loan.principal) * (v / v_tilde).powf(beta(collateral)))
    }
}

/// Complete-market fee: the common limit of [`fee`] as `rho^2 -> 1` or
/// `gamma -> 0`.  With no dividend the threshold is infinite, the option is
/// worth the collateral itself, and the fee equals the full principal.
pub fn complete_market_fee(
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
) -> Result<FeeQuote> {
    let v_tilde = complete_market_threshold(market, collateral, loan)?;
    let diagnostics = |branch| Diagnostics {
        method: ValuationMethod::CompleteMarketLimit,
        branch,
        iterations: 0,
        residual: 0.0,
        psor_max_iterations: 0,
        psor_max_residual: 0.0,
        raw_fee: None,
    };
    if v_tilde.is_infinite() {
        return Ok(FeeQuote {
            fee: loan.principal,
            bank_cost: loan.v0,
            p0: loan.v0,
            boundary: Boundary::Threshold(f64::INFINITY),
            diagnostics: diagnostics(FeeBranch::Continuation),
        });
    }
    if loan.v0 >= v_tilde {
        return Ok(FeeQuote {
            fee: 0.0,
            bank_cost: loan.v0 - loan.principal,
            p0: loan.v0 - loan.principal,
            boundary: Boundary::Threshold(v_tilde),
            diagnostics: diagnostics(FeeBranch::ImmediateExercise),
        });
    }
    let cost = (v_tilde - loan.principal) * (loan.v0 / v_tilde).powf(beta(collateral));
    Ok(FeeQuote {
        fee: loan.principal + cost - loan.v0,
        bank_cost: cost,
        p0: cost,
        boundary: Boundary::Threshold(v_tilde),
        diagnostics: diagnostics(FeeBranch::Continuation),
    })
}
