//! Model parameters shared by every solver.
//!
//! All rates are continuously compounded per year, volatilities per √year,
//! and monetary amounts in the configuration's currency unit.  The
//! collateral drift is never user-supplied: it is pinned by the equilibrium
//! condition `(mu2 - r)/sigma2 = rho * (mu1 - r)/sigma1` net of the dividend
//! rate, which keeps the threshold exponent `beta = 1 + 2*delta/sigma2^2`
//! at or above one for every accepted parameter set.

use serde::Serialize;

use crate::error::{Error, Result};

fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            constraint: "finite",
        })
    }
}

/// Risk-free rate and market-portfolio dynamics (`r`, `mu1`, `sigma1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketModel {
    /// Risk-free rate per year.
    pub r: f64,
    /// Market-portfolio drift per year.
    pub mu1: f64,
    /// Market-portfolio volatility per √year.
    pub sigma1: f64,
}

impl MarketModel {
    pub fn new(r: f64, mu1: f64, sigma1: f64) -> Result<Self> {
        require_finite("r", r)?;
        require_finite("mu1", mu1)?;
        require_finite("sigma1", sigma1)?;
        if sigma1 <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma1",
                value: sigma1,
                constraint: "> 0",
            });
        }
        Ok(Self { r, mu1, sigma1 })
    }

    /// Market price of risk `(mu1 - r) / sigma1`.
    pub fn sharpe_ratio(&self) -> f64 {
        (self.mu1 - self.r) / self.sigma1
    }
}

/// Collateral-asset dynamics (`sigma2`, `delta`, `rho`) with the
/// equilibrium-implied drift `mu2` stored for inspection.
///
/// Fields are private so that `mu2` can never drift out of sync with the
/// parameters it is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollateralModel {
    sigma2: f64,
    delta: f64,
    rho: f64,
    mu2: f64,
}

impl CollateralModel {
    /// Validates the parameters and derives `mu2` from the equilibrium
    /// condition.  Negative dividend rates are rejected: they would push
    /// the threshold exponent below one, a regime in which smooth pasting
    /// fails and the repayment option is never exercised.
    pub fn new(market: &MarketModel, sigma2: f64, delta: f64, rho: f64) -> Result<Self> {
        require_finite("sigma2", sigma2)?;
        require_finite("delta", delta)?;
        require_finite("rho", rho)?;
        if sigma2 <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma2",
                value: sigma2,
                constraint: "> 0",
            });
        }
        if delta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: delta,
                constraint: ">= 0",
            });
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter {
                name: "rho",
                value: rho,
                constraint: "in [-1, 1]",
            });
        }
        let mu2 = implied_mu2(market, sigma2, delta, rho);
        Ok(Self {
            sigma2,
            delta,
            rho,
            mu2,
        })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Equilibrium-implied collateral drift.
    pub fn mu2(&self) -> f64 {
        self.mu2
    }
}

/// Collateral drift implied by equilibrium:
/// `mu2 = rho * sigma2 * (mu1 - r)/sigma1 + r - delta`.
pub fn implied_mu2(market: &MarketModel, sigma2: f64, delta: f64, rho: f64) -> f64 {
    rho * sigma2 * market.sharpe_ratio() + market.r - delta
}

/// Threshold exponent `beta = 1 + 2*delta/sigma2^2`.
///
/// This is the equilibrium form of the general exponent
/// `1 - (2/sigma2) * ((mu2 - r)/sigma2 - rho*(mu1 - r)/sigma1)`; with the
/// drift pinned by [`implied_mu2`] the two coincide and the result is >= 1.
pub fn beta(collateral: &CollateralModel) -> f64 {
    1.0 + 2.0 * collateral.delta / (collateral.sigma2 * collateral.sigma2)
}

/// Loan horizon: open-ended, or a hard maturity in years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Horizon {
    Perpetual,
    Finite { maturity: f64 },
}

impl Horizon {
    pub fn is_perpetual(&self) -> bool {
        matches!(self, Horizon::Perpetual)
    }
}

/// Loan contract: principal `L`, loan rate `alpha`, collateral value `v0`
/// at inception, and the horizon.  Inception time is normalized to zero;
/// every formula depends only on time since inception.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoanTerms {
    /// Principal lent, `L > 0`.
    pub principal: f64,
    /// Loan rate per year charged on the principal.
    pub alpha: f64,
    /// Collateral value at inception, `v0 > 0`.
    pub v0: f64,
    pub horizon: Horizon,
}

impl LoanTerms {
    pub fn new(principal: f64, alpha: f64, v0: f64, horizon: Horizon) -> Result<Self> {
        require_finite("principal", principal)?;
        require_finite("alpha", alpha)?;
        require_finite("v0", v0)?;
        if principal <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "principal",
                value: principal,
                constraint: "> 0",
            });
        }
        if v0 <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "v0",
                value: v0,
                constraint: "> 0",
            });
        }
        if let Horizon::Finite { maturity } = horizon {
            require_finite("maturity", maturity)?;
            if maturity <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "maturity",
                    value: maturity,
                    constraint: "> 0",
                });
            }
        }
        Ok(Self {
            principal,
            alpha,
            v0,
            horizon,
        })
    }

    /// Discounted strike at time `t`: `e^{(alpha - r) t} L`.
    pub fn strike(&self, r: f64, t: f64) -> f64 {
        ((self.alpha - r) * t).exp() * self.principal
    }
}

/// Exponential-utility risk aversion `gamma` (inverse currency units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskPreference {
    pub gamma: f64,
}

impl RiskPreference {
    pub fn new(gamma: f64) -> Result<Self> {
        require_finite("gamma", gamma)?;
        if gamma <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma,
                constraint: "> 0",
            });
        }
        Ok(Self { gamma })
    }

    /// The shorthand `k = gamma * (1 - rho^2)` that scales every
    /// incomplete-market formula.
    pub fn k(&self, collateral: &CollateralModel) -> f64 {
        self.gamma * (1.0 - collateral.rho * collateral.rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn market(r: f64, mu1: f64, sigma1: f64) -> MarketModel {
        MarketModel::new(r, mu1, sigma1).unwrap()
    }

    #[test]
    fn implied_mu2_zero_premium_gives_r() {
        let m = market(0.05, 0.05, 0.2);
        assert_abs_diff_eq!(implied_mu2(&m, 0.15, 0.0, 0.9), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn implied_mu2_uncorrelated_gives_r_minus_delta() {
        let m = market(0.05, 0.10, 0.2);
        assert_abs_diff_eq!(implied_mu2(&m, 0.15, 0.05, 0.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn implied_mu2_direct_arithmetic() {
        // 0.4 * 0.4 * 0.25 + 0.05 - 0.05
        let m = market(0.05, 0.10, 0.2);
        assert_abs_diff_eq!(implied_mu2(&m, 0.4, 0.05, 0.4), 0.04, epsilon = 1e-15);
    }

    #[test]
    fn beta_matches_hand_values() {
        let m = market(0.05, 0.10, 0.2);
        let c = CollateralModel::new(&m, 0.15, 0.05, 0.9).unwrap();
        assert_abs_diff_eq!(beta(&c), 1.0 + 0.1 / 0.0225, epsilon = 1e-12);

        let c = CollateralModel::new(&m, 0.15, 0.0, 0.9).unwrap();
        assert_abs_diff_eq!(beta(&c), 1.0, epsilon = 0.0);

        let c = CollateralModel::new(&m, 0.4, 0.05, 0.4).unwrap();
        assert_abs_diff_eq!(beta(&c), 1.625, epsilon = 1e-15);
    }

    #[test]
    fn beta_equals_general_form_under_equilibrium() {
        let m = market(0.04, 0.11, 0.25);
        let c = CollateralModel::new(&m, 0.3, 0.07, -0.6).unwrap();
        let general = 1.0
            - (2.0 / c.sigma2())
                * ((c.mu2() - m.r) / c.sigma2() - c.rho() * m.sharpe_ratio());
        assert_abs_diff_eq!(beta(&c), general, epsilon = 1e-12);
    }

    #[test]
    fn collateral_rejects_bad_inputs() {
        let m = market(0.05, 0.10, 0.2);
        assert!(CollateralModel::new(&m, 0.0, 0.0, 0.5).is_err());
        assert!(CollateralModel::new(&m, 0.2, -0.01, 0.5).is_err());
        assert!(CollateralModel::new(&m, 0.2, 0.0, 1.5).is_err());
        assert!(CollateralModel::new(&m, f64::NAN, 0.0, 0.5).is_err());
    }

    #[test]
    fn loan_terms_reject_bad_inputs() {
        assert!(LoanTerms::new(0.0, 0.05, 100.0, Horizon::Perpetual).is_err());
        assert!(LoanTerms::new(90.0, 0.05, -1.0, Horizon::Perpetual).is_err());
        assert!(LoanTerms::new(90.0, 0.05, 100.0, Horizon::Finite { maturity: 0.0 }).is_err());
        assert!(RiskPreference::new(0.0).is_err());
    }

    #[test]
    fn stored_mu2_round_trips_bit_for_bit() {
        let m = market(0.03, 0.09, 0.18);
        let c = CollateralModel::new(&m, 0.22, 0.04, 0.35).unwrap();
        assert_eq!(c.mu2(), implied_mu2(&m, 0.22, 0.04, 0.35));
    }

    proptest! {
        #[test]
        fn beta_at_least_one(sigma2 in 0.01f64..2.0, delta in 0.0f64..0.5) {
            let m = market(0.05, 0.10, 0.2);
            let c = CollateralModel::new(&m, sigma2, delta, 0.3).unwrap();
            prop_assert!(beta(&c) >= 1.0);
        }

        #[test]
        fn implied_mu2_linear_in_rho_and_delta(
            sigma2 in 0.05f64..1.0,
            delta in 0.0f64..0.3,
            rho in -1.0f64..1.0,
            d_rho in -0.5f64..0.5,
            d_delta in 0.0f64..0.2,
        ) {
            let m = market(0.05, 0.12, 0.25);
            let rho2 = (rho + d_rho).clamp(-1.0, 1.0);
            let base = implied_mu2(&m, sigma2, delta, rho);

            let slope_rho = sigma2 * m.sharpe_ratio();
            let moved = implied_mu2(&m, sigma2, delta, rho2);
            prop_assert!((moved - base - slope_rho * (rho2 - rho)).abs() < 1e-12);

            let moved = implied_mu2(&m, sigma2, delta + d_delta, rho);
            prop_assert!((moved - base + d_delta).abs() < 1e-12);
        }
    }
}
