//! Independent brute-force validators.
//!
//! Nothing here shares code with the production solvers: Monte Carlo
//! simulation prices the bank's barrier claim pathwise under the pricing
//! measure, a binomial tree solves the borrower's stopping problem under
//! the minimal martingale measure (where the collateral drifts at `-delta`),
//! and a closed-form European value covers the no-barrier degenerate case.
//! The test suites cross-check the closed forms and the PDE pipeline
//! against these.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::finite::ObstacleSpec;
use crate::model::{CollateralModel, Horizon, LoanTerms, MarketModel, RiskPreference};
use crate::quote::Boundary;

/// Simulation controls.  Estimates are bit-reproducible for a fixed
/// configuration: paths are generated in fixed-size batches, each batch on
/// its own counter-mode RNG stream (`seed` + batch index), and partial sums
/// are reduced in batch order regardless of thread scheduling.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathConfig {
    /// Total simulated paths (antithetic legs count individually).
    pub n_paths: usize,
    /// Time steps per path.
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            n_steps: 1000,
            seed: 42,
            antithetic: true,
        }
    }
}

impl PathConfig {
    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || (self.antithetic && self.n_paths % 2 != 0) {
            return Err(Error::InvalidParameter {
                name: "n_paths",
                value: self.n_paths as f64,
                constraint: "positive (and even when antithetic)",
            });
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "n_steps",
                value: self.n_steps as f64,
                constraint: "positive",
            });
        }
        Ok(())
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Independent samples behind the standard error (pairs when
    /// antithetic).
    pub samples: usize,
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Discounted expectation of `(V_T - strike)^+` for a lognormal terminal
/// value with rate `r_hat` and dividend yield `delta`.
pub fn european_call_closed_form(
    v0: f64,
    strike: f64,
    sigma: f64,
    delta: f64,
    r_hat: f64,
    t: f64,
) -> f64 {
    if t <= 0.0 {
        return (v0 - strike).max(0.0);
    }
    let sig_sqrt = sigma * t.sqrt();
    if sig_sqrt <= 0.0 {
        return (-r_hat * t).exp() * (v0 * ((r_hat - delta) * t).exp() - strike).max(0.0);
    }
    let d1 = ((v0 / strike).ln() + (r_hat - delta + 0.5 * sigma * sigma) * t) / sig_sqrt;
    let d2 = d1 - sig_sqrt;
    v0 * (-delta * t).exp() * norm_cdf(d1) - strike * (-r_hat * t).exp() * norm_cdf(d2)
}

/// Crossing probability of an upper barrier by the geometric bridge between
/// two simulated points one step apart.  Exact for a constant barrier, so
/// coarse steps introduce no monitoring bias there; a time-varying barrier
/// is treated as constant within each step.
fn bridge_crossing_probability(v_from: f64, v_to: f64, barrier: f64, sigma2_dt: f64) -> f64 {
    if v_from >= barrier || v_to >= barrier {
        return 1.0;
    }
    let a = (barrier / v_from).ln();
    let b = (barrier / v_to).ln();
    (-2.0 * a * b / sigma2_dt).exp()
}

/// Truncation horizon for the open-ended barrier claim: doubles until the
/// probability mass of hitting after the horizon is below `1e-4` of the
/// total hitting probability, using the closed-form crossing law of the
/// simulated log-process.
fn default_truncation_horizon(v0: f64, barrier: f64, log_drift: f64, sigma: f64) -> f64 {
    let b = (barrier / v0).ln();
    let p_ever = if log_drift < 0.0 {
        (2.0 * log_drift * b / (sigma * sigma)).exp()
    } else {
        1.0
    };
    let crossed_by = |t: f64| {
        let s = sigma * t.sqrt();
        norm_cdf((-b + log_drift * t) / s)
            + (2.0 * log_drift * b / (sigma * sigma)).exp() * norm_cdf((-b - log_drift * t) / s)
    };
    let mut horizon = 16.0;
    while p_ever - crossed_by(horizon) > 1e-4 * p_ever && horizon < 4096.0 {
        horizon *= 2.0;
    }
    horizon
}

struct BatchSums {
    sum: f64,
    sum_sq: f64,
    count: usize,
}

/// Monte Carlo value of the bank's claim: simulate the accrual-adjusted
/// collateral under the pricing measure (exact lognormal increments), pay
/// `(barrier - L)^+` discounted at `r - alpha` on the first crossing of the
/// adjusted boundary, plus the repayment payoff at maturity for paths that
/// finish in the money without crossing.  Perpetual claims truncate the
/// horizon where the residual hitting mass is provably negligible
/// (`t_trunc` overrides the automatic choice).
pub fn mc_barrier_cost(
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
    boundary: &Boundary,
    cfg: &PathConfig,
    t_trunc: Option<f64>,
) -> Result<McEstimate> {
    cfg.validate()?;
    let r_hat = market.r - loan.alpha;
    let sigma = collateral.sigma2();
    let delta = collateral.delta();
    let principal = loan.principal;
    let log_drift = r_hat - delta - 0.5 * sigma * sigma;

    let (horizon, terminal_exercise) = match loan.horizon {
        Horizon::Finite { maturity } => (maturity, true),
        Horizon::Perpetual => {
            let level = match boundary {
                Boundary::Threshold(b) => *b,
                Boundary::Curve(_) => {
                    return Err(Error::InvalidBoundary(
                        "perpetual claims need a scalar threshold".into(),
                    ))
                }
            };
            let horizon = t_trunc
                .unwrap_or_else(|| default_truncation_horizon(loan.v0, level, log_drift, sigma));
            (horizon, false)
        }
    };

    // Adjusted barrier at a given time.
    let hat_barrier = |t: f64| -> f64 {
        let level = match boundary {
            Boundary::Threshold(b) => *b,
            Boundary::Curve(curve) => curve.level_at(t),
        };
        if level.is_finite() {
            (r_hat * t).exp() * level
        } else {
            f64::INFINITY
        }
    };

    let b0 = hat_barrier(0.0);
    if loan.v0 >= b0 {
        return Ok(McEstimate {
            estimate: (b0 - principal).max(0.0),
            stderr: 0.0,
            samples: cfg.n_paths,
        });
    }

    let n_steps = cfg.n_steps;
    let dt = horizon / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let sigma2_dt = sigma * sigma * dt;

    // Barrier levels per step, treated as constant over each interval.
    let step_barrier: Vec<f64> = (0..n_steps)
        .map(|i| hat_barrier((i as f64 + 0.5) * dt))
        .collect();
    let end_barrier: Vec<f64> = (1..=n_steps).map(|i| hat_barrier(i as f64 * dt)).collect();

    let simulate_leg = |zs: &[f64], sign: f64, rng: &mut ChaCha12Rng| -> f64 {
        let mut v = loan.v0;
        for step in 0..n_steps {
            let v_next = v * (log_drift * dt + sigma * sqrt_dt * sign * zs[step]).exp();
            let t_end = (step + 1) as f64 * dt;
            if v_next >= end_barrier[step] {
                return (-r_hat * t_end).exp() * (end_barrier[step] - principal).max(0.0);
            }
            let barrier = step_barrier[step];
            if barrier.is_finite() {
                let p = bridge_crossing_probability(v, v_next, barrier, sigma2_dt);
                if p >= 1.0 || (p > 0.0 && rng.gen::<f64>() < p) {
                    return (-r_hat * t_end).exp() * (barrier - principal).max(0.0);
                }
            }
            v = v_next;
        }
        if terminal_exercise {
            (-r_hat * horizon).exp() * (v - principal).max(0.0)
        } else {
            0.0
        }
    };

    const BATCH: usize = 4096;
    let units = if cfg.antithetic {
        cfg.n_paths / 2
    } else {
        cfg.n_paths
    };
    let n_batches = units.div_ceil(BATCH);

    let partials: Vec<BatchSums> = (0..n_batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
            rng.set_stream(batch as u64 + 1);
            let mut zs = vec![0.0f64; n_steps];
            let lo = batch * BATCH;
            let hi = units.min(lo + BATCH);
            let mut sums = BatchSums {
                sum: 0.0,
                sum_sq: 0.0,
                count: hi - lo,
            };
            for _ in lo..hi {
                for z in zs.iter_mut() {
                    *z = rng.sample(StandardNormal);
                }
                let sample = if cfg.antithetic {
                    0.5 * (simulate_leg(&zs, 1.0, &mut rng) + simulate_leg(&zs, -1.0, &mut rng))
                } else {
                    simulate_leg(&zs, 1.0, &mut rng)
                };
                sums.sum += sample;
                sums.sum_sq += sample * sample;
            }
            sums
        })
        .collect();

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for p in &partials {
        sum += p.sum;
        sum_sq += p.sum_sq;
        count += p.count;
    }
    let mean = sum / count as f64;
    let variance = if count > 1 {
        ((sum_sq - count as f64 * mean * mean) / (count - 1) as f64).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: mean,
        stderr: (variance / count as f64).sqrt(),
        samples: count,
    })
}

/// Binomial stopping tree: value and per-step exercise boundary.
#[derive(Debug, Clone)]
pub struct TreeStopping {
    /// `F(0, v0)`.
    pub f0: f64,
    pub times: Vec<f64>,
    /// Lowest exercising collateral level per step (`+inf` where none).
    pub boundary: Vec<f64>,
}

/// Solves `F(t, v) = inf over stopping times of E[kappa(tau, V_tau)]` on a
/// recombining binomial tree, with the collateral drifting at `-delta`
/// under the minimal martingale measure.  Backward induction takes
/// `min(stop, continue)` at each node; no discounting enters because the
/// objective is a plain expectation.
pub fn tree_stopping(
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
    pref: &RiskPreference,
    n_steps: usize,
) -> Result<TreeStopping> {
    const MIN_STEPS: usize = 50;
    if n_steps < MIN_STEPS {
        return Err(Error::StepCountTooSmall {
            given: n_steps,
            min: MIN_STEPS,
        });
    }
    let maturity = match loan.horizon {
        Horizon::Finite { maturity } => maturity,
        Horizon::Perpetual => {
            return Err(Error::HorizonMismatch(
                "the stopping tree requires a finite maturity",
            ))
        }
    };
    let obstacle = ObstacleSpec::new(market, collateral, loan, pref)?;
    let sigma = collateral.sigma2();
    let delta = collateral.delta();
    let dt = maturity / n_steps as f64;
    let up = (sigma * dt.sqrt()).exp();
    let down = 1.0 / up;
    let p_up = ((-delta * dt).exp() - down) / (up - down);
    if !(0.0..=1.0).contains(&p_up) {
        return Err(Error::InvalidParameter {
            name: "n_steps",
            value: n_steps as f64,
            constraint: "large enough that the branch probability lies in (0, 1)",
        });
    }

    let node_value = |i: usize, j: usize| -> f64 {
        loan.v0 * (sigma * dt.sqrt() * (2.0 * j as f64 - i as f64)).exp()
    };

    let mut values: Vec<f64> = (0..=n_steps)
        .map(|j| obstacle.kappa(maturity, node_value(n_steps, j)))
        .collect();
    let mut boundary = vec![f64::INFINITY; n_steps + 1];
    let strike_at_expiry = obstacle.strike(maturity);
    boundary[n_steps] = (0..=n_steps)
        .map(|j| node_value(n_steps, j))
        .find(|&v| v > strike_at_expiry)
        .unwrap_or(f64::INFINITY);

    for i in (0..n_steps).rev() {
        let t = i as f64 * dt;
        let strike = obstacle.strike(t);
        let mut lowest_exercise = f64::INFINITY;
        for j in 0..=i {
            let v = node_value(i, j);
            let continuation = p_up * values[j + 1] + (1.0 - p_up) * values[j];
            let stop = obstacle.kappa(t, v);
            if stop <= continuation {
                values[j] = stop;
                if v > strike && v < lowest_exercise {
                    lowest_exercise = v;
                }
            } else {
                values[j] = continuation;
            }
        }
        boundary[i] = lowest_exercise;
    }

    Ok(TreeStopping {
        f0: values[0],
        times: (0..=n_steps).map(|i| i as f64 * dt).collect(),
        boundary,
    })
}

/// Convenience wrapper returning only `F(0, v0)`.
pub fn tree_stopping_f(
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
    pref: &RiskPreference,
    n_steps: usize,
) -> Result<f64> {
    Ok(tree_stopping(market, collateral, loan, pref, n_steps)?.f0)
}
