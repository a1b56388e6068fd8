//! Finite-maturity valuation.
//!
//! The borrower's indifference problem factorises into a scalar obstacle
//! problem for `F(t, v)` with upper obstacle
//! `kappa(t, v) = exp(-k (v - e^{(alpha-r)t} L)^+)`, drift `-delta v`,
//! diffusion `sigma2^2 v^2 / 2`, and `F(t, 0) = 1`.  The indifference value
//! is `p = -ln(F) / k` and the exercise boundary is the smallest `v` at
//! which `F` touches `kappa`.
//!
//! Given the boundary, the bank's hedging cost solves a Black–Scholes PDE
//! in the accrual-adjusted variables `V_hat = e^{(r-alpha)t} V`, on the
//! region below the adjusted boundary, with the repayment payoff as
//! Dirichlet data.  The loan fee is then `c = L + C(0, v0) - v0`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lcp::{
    self, build_grid, Grid, GridSpacing, LcpProblem, LcpSolution, PsorParams, RightBoundary,
    Scheme,
};
use crate::model::{CollateralModel, Horizon, LoanTerms, MarketModel, RiskPreference};
use crate::perpetual::{self, K_MIN};
use crate::quote::{Boundary, Diagnostics, FeeBranch, FeeQuote, ValuationMethod};

/// Obstacle of the transformed indifference problem.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ObstacleSpec {
    /// `gamma * (1 - rho^2)`.
    pub k: f64,
    /// Strike growth rate `alpha - r`.
    pub strike_growth: f64,
    /// Principal `L`.
    pub principal: f64,
}

impl ObstacleSpec {
    pub fn new(
        market: &MarketModel,
        collateral: &CollateralModel,
        loan: &LoanTerms,
        pref: &RiskPreference,
    ) -> Result<Self> {
        let k = pref.k(collateral);
        if k < K_MIN {
            return Err(Error::DegenerateRiskAversion { k, min: K_MIN });
        }
        Ok(Self {
            k,
            strike_growth: loan.alpha - market.r,
            principal: loan.principal,
        })
    }

    /// Discounted strike at time `t`.
    pub fn strike(&self, t: f64) -> f64 {
        (self.strike_growth * t).exp() * self.principal
    }

    /// `kappa(t, v) = exp(-k (v - strike(t))^+)`.
    pub fn kappa(&self, t: f64, v: f64) -> f64 {
        (-self.k * (v - self.strike(t)).max(0.0)).exp()
    }
}

/// Exercise boundary `V*(t)` extracted from a solved surface.  Levels are
/// `+inf` at time steps where no node satisfied the detection criterion
/// (boundary beyond the grid).
#[derive(Debug, Clone, Serialize)]
pub struct ExerciseBoundary {
    pub times: Vec<f64>,
    pub levels: Vec<f64>,
    pub detection_tol: f64,
}

impl ExerciseBoundary {
    /// Piecewise-linear boundary level at time `t`; infinite if either
    /// bracketing node is off-grid.
    pub fn level_at(&self, t: f64) -> f64 {
        let times = &self.times;
        if t <= times[0] {
            return self.levels[0];
        }
        if t >= *times.last().unwrap() {
            return *self.levels.last().unwrap();
        }
        let j = times.partition_point(|&x| x < t);
        let (l0, l1) = (self.levels[j - 1], self.levels[j]);
        if !l0.is_finite() || !l1.is_finite() {
            return f64::INFINITY;
        }
        let w = (t - times[j - 1]) / (times[j] - times[j - 1]);
        l0 + (l1 - l0) * w
    }
}

/// Grid and solver controls for the finite-maturity pipeline.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverConfig {
    /// Space nodes.
    pub nv: usize,
    /// Time nodes.
    pub nt: usize,
    /// Domain truncation; `None` selects `5 * max(v0, L) * e^{|alpha-r| T}`.
    pub v_max: Option<f64>,
    /// Cluster space nodes around the principal instead of uniform spacing.
    pub geometric_spacing: bool,
    pub theta: f64,
    pub rannacher_steps: usize,
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Absolute threshold on `kappa - F` for boundary detection.
    pub detection_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nv: 800,
            nt: 2000,
            v_max: None,
            geometric_spacing: false,
            theta: 0.5,
            rannacher_steps: 4,
            omega: 1.4,
            tol: 1e-9,
            max_iter: 10_000,
            detection_tol: 1e-7,
        }
    }
}

impl SolverConfig {
    pub fn scheme(&self) -> Scheme {
        Scheme {
            theta: self.theta,
            rannacher_steps: self.rannacher_steps,
        }
    }

    pub fn psor(&self) -> PsorParams {
        PsorParams {
            omega: self.omega,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    /// Half the grid spacing in both directions; used for refinement checks.
    pub fn refined(&self) -> Self {
        Self {
            nv: self.nv * 2,
            nt: self.nt * 2,
            ..*self
        }
    }
}

fn maturity_of(loan: &LoanTerms) -> Result<f64> {
    match loan.horizon {
        Horizon::Finite { maturity } => Ok(maturity),
        Horizon::Perpetual => Err(Error::HorizonMismatch(
            "finite-maturity valuation called with a perpetual loan",
        )),
    }
}

fn default_v_max(loan: &LoanTerms, strike_growth: f64, maturity: f64) -> f64 {
    5.0 * loan.v0.max(loan.principal) * (strike_growth.abs() * maturity).exp()
}

/// Solved indifference problem: the LCP surface for `F`, the extracted
/// exercise boundary, and the time-zero values.
#[derive(Debug, Clone)]
pub struct IndifferenceSolution {
    pub lcp: LcpSolution,
    pub boundary: ExerciseBoundary,
    pub obstacle: ObstacleSpec,
    /// `F(0, v0)`.
    pub f0: f64,
    /// Indifference value `p(0, v0) = -ln(f0) / k`.
    pub p0: f64,
}

/// Solves the obstacle problem for `F`, extracts the exercise boundary, and
/// evaluates the time-zero indifference value.
pub fn solve_indifference(
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
    pref: &RiskPreference,
    cfg: &SolverConfig,
) -> Result<IndifferenceSolution> {
    let maturity = maturity_of(loan)?;
    let obstacle = ObstacleSpec::new(market, collateral, loan, pref)?;
    let v_max = cfg
        .v_max
        .unwrap_or_else(|| default_v_max(loan, obstacle.strike_growth, maturity));
    let spacing = if cfg.geometric_spacing {
        GridSpacing::Geometric {
            center: loan.principal.min(0.9 * v_max),
        }
    } else {
        GridSpacing::Uniform
    };
    let grid = build_grid(v_max, cfg.nv, maturity, cfg.nt, spacing)?;

    let delta = collateral.delta();
    let sigma2 = collateral.sigma2();
    let problem = LcpProblem {
        // Under the equilibrium drift the advection coefficient collapses
        // to the dividend drag.
        drift: Box::new(move |v, _| -delta * v),
        diffusion: Box::new(move |v, _| 0.5 * sigma2 * sigma2 * v * v),
        discount: Box::new(|_| 0.0),
        obstacle: Box::new(move |v, t| obstacle.kappa(t, v)),
        terminal: Box::new(move |v| obstacle.kappa(maturity, v)),
        left_boundary: Box::new(|_| 1.0),
        right_boundary: RightBoundary::ZeroSecondDerivative,
    };
    let lcp = lcp::solve_lcp(&problem, &grid, cfg.scheme(), cfg.psor())?;
    let boundary = extract_boundary(&lcp, &obstacle, cfg.detection_tol);
    let f0 = lcp.grid.interpolate(&lcp.surface[0], loan.v0);
    let p0 = -f0.ln() / obstacle.k;
    Ok(IndifferenceSolution {
        lcp,
        boundary,
        obstacle,
        f0,
        p0,
    })
}

/// Extracts `V*(t) = inf { v > strike(t) : F(t, v) = kappa(t, v) }` from a
/// solved surface: at each time step, the smallest node where the obstacle
/// gap `kappa - F` falls below the detection tolerance, refined by linear
/// interpolation of the gap between the bracketing nodes.
pub fn extract_boundary(
    sol: &LcpSolution,
    obstacle: &ObstacleSpec,
    detection_tol: f64,
) -> ExerciseBoundary {
    let grid = &sol.grid;
    let v = grid.v_nodes();
    let times = grid.t_nodes().to_vec();
    let mut levels = Vec::with_capacity(times.len());
    for (n, &t) in times.iter().enumerate() {
        let strike = obstacle.strike(t);
        let row = &sol.surface[n];
        let gap = |i: usize| obstacle.kappa(t, v[i]) - row[i];
        let hit = (0..v.len()).find(|&i| v[i] > strike && gap(i) <= detection_tol);
        let level = match hit {
            None => f64::INFINITY,
            Some(m) => {
                debug_assert!(m >= 1);
                let g_prev = gap(m - 1);
                if g_prev <= detection_tol {
                    // Everything above the strike binds (terminal slice):
                    // the infimum over v > strike is the strike itself.
                    strike
                } else {
                    // Smooth fit gives the gap quadratic contact at the
                    // boundary, so sqrt(gap) vanishes linearly there;
                    // extrapolating it through the last two continuation
                    // nodes is grid-stable where the plain tolerance
                    // crossing is not.
                    let quadratic = if m >= 2 && v[m - 2] > strike && gap(m - 2) > g_prev {
                        let s_far = gap(m - 2).sqrt();
                        let s_near = g_prev.sqrt();
                        let step = v[m - 1] - v[m - 2];
                        Some((v[m - 1] + step * s_near / (s_far - s_near)).clamp(v[m - 1], v[m]))
                    } else {
                        None
                    };
                    let level = quadratic.unwrap_or_else(|| {
                        let g_m = gap(m);
                        let w = (g_prev - detection_tol) / (g_prev - g_m);
                        v[m - 1] + w * (v[m] - v[m - 1])
                    });
                    level.max(strike)
                }
            }
        };
        levels.push(level);
    }
    ExerciseBoundary {
        times,
        levels,
        detection_tol,
    }
}

/// Bank's hedging cost `C(0, v0)` of the repayment option exercised at the
/// given boundary: a backward θ-scheme for the Black–Scholes PDE in the
/// accrual-adjusted variables, on the region below the adjusted boundary
/// `e^{(r-alpha)t} V*(t)`, with `C = 0` at `v = 0`, the repayment payoff as
/// Dirichlet data at the boundary, and `(v - L)^+` at maturity.
///
/// The boundary generally falls between grid nodes; the last interior row
/// uses a shortened stencil reaching to the exact boundary position so that
/// the moving Dirichlet condition does not staircase with the grid.
pub fn bank_cost_pde(
    boundary: &ExerciseBoundary,
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
    grid: &Grid,
    scheme: Scheme,
) -> Result<f64> {
    maturity_of(loan)?;
    let r_hat = market.r - loan.alpha;
    let delta = collateral.delta();
    let sigma2 = collateral.sigma2();
    let principal = loan.principal;

    if loan.v0 >= boundary.level_at(0.0) {
        return Ok(loan.v0 - principal);
    }

    let v = grid.v_nodes();
    let t = grid.t_nodes();
    let nv = grid.nv();
    let nt = grid.nt();
    let payoff = |x: f64| (x - principal).max(0.0);

    // Boundary in adjusted variables, per time node.
    let mut hatted = Vec::with_capacity(nt);
    for &tn in t {
        let level = boundary.level_at(tn);
        let h = if level.is_finite() {
            (r_hat * tn).exp() * level
        } else {
            f64::INFINITY
        };
        if !(h > 0.0) {
            return Err(Error::InvalidBoundary(format!(
                "adjusted boundary is not positive at t = {tn}"
            )));
        }
        hatted.push(h);
    }

    let drift = move |x: f64, _: f64| (r_hat - delta) * x;
    let diffusion = move |x: f64, _: f64| 0.5 * sigma2 * sigma2 * x * x;
    let discount = move |_: f64| r_hat;

    let mut c: Vec<f64> = v.iter().map(|&x| payoff(x)).collect();
    let mut lower = vec![0.0; nv];
    let mut diag = vec![1.0; nv];
    let mut upper = vec![0.0; nv];
    let mut rhs = vec![0.0; nv];

    for n in (0..nt - 1).rev() {
        let step_index = nt - 2 - n;
        let theta = if step_index < scheme.rannacher_steps {
            1.0
        } else {
            scheme.theta
        };
        let dt = t[n + 1] - t[n];
        let rows_n = lcp::operator_rows(grid, &drift, &diffusion, &discount, t[n], false)?;
        let rows_np1 = lcp::operator_rows(grid, &drift, &diffusion, &discount, t[n + 1], false)?;

        // First node at or beyond the boundary; nv when the boundary is
        // outside the grid.
        let cut = v.partition_point(|&x| x < hatted[n]);
        if cut <= 1 {
            for i in 0..nv {
                c[i] = payoff(v[i]);
            }
            c[0] = 0.0;
            continue;
        }
        let last = if cut >= nv { nv - 1 } else { cut - 1 };

        let standard_last = if cut >= nv { last } else { last - 1 };
        for i in 1..=standard_last {
            lower[i] = -theta * dt * rows_n.lower[i];
            diag[i] = 1.0 - theta * dt * rows_n.diag[i];
            upper[i] = -theta * dt * rows_n.upper[i];
            let explicit = rows_np1.lower[i] * c[i - 1]
                + rows_np1.diag[i] * c[i]
                + if i + 1 < nv {
                    rows_np1.upper[i] * c[i + 1]
                } else {
                    0.0
                };
            rhs[i] = c[i] + (1.0 - theta) * dt * explicit;
        }
        if cut < nv {
            // Boundary-fitted row: shortened stencil from the last interior
            // node to the exact boundary position, fully implicit.
            let i = last;
            let h_minus = v[i] - v[i - 1];
            let h_plus = hatted[n] - v[i];
            if h_plus <= 1e-12 * h_minus {
                // Boundary coincides with the node: plain Dirichlet.
                lower[i] = 0.0;
                diag[i] = 1.0;
                upper[i] = 0.0;
                rhs[i] = payoff(hatted[n]);
            } else {
                let (l, d, u) = lcp::stencil(
                    h_minus,
                    h_plus,
                    drift(v[i], t[n]),
                    diffusion(v[i], t[n]),
                    discount(t[n]),
                );
                lower[i] = -dt * l;
                diag[i] = 1.0 - dt * d;
                upper[i] = 0.0;
                rhs[i] = c[i] + dt * u * payoff(hatted[n]);
            }
        }

        // Fold the left Dirichlet value (zero) and solve.
        lower[1] = 0.0;
        lcp::thomas(&lower, &diag, &upper, &mut rhs, 1, last);
        c[0] = 0.0;
        c[1..=last].copy_from_slice(&rhs[1..=last]);
        for i in last + 1..nv {
            c[i] = payoff(v[i]);
        }
    }

    Ok(grid.interpolate(&c, loan.v0))
}

/// Full finite-maturity pipeline: indifference solve, boundary extraction,
/// bank-cost PDE, and the fee relation `c = L + C - v0`.
///
/// Small negative fees (within 0.5% of the principal) are grid error on
/// exact-zero rows and are clamped to zero with the raw value retained in
/// the diagnostics; larger negatives are an error.
pub fn fee_finite(
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
    pref: &RiskPreference,
    cfg: &SolverConfig,
) -> Result<FeeQuote> {
    let ind = solve_indifference(market, collateral, loan, pref, cfg)?;
    let psor_max_iterations = ind.lcp.psor_iterations.iter().copied().max().unwrap_or(0);
    let psor_max_residual = ind.lcp.max_residual;
    let diagnostics = |branch, raw_fee| Diagnostics {
        method: ValuationMethod::FiniteDifference,
        branch,
        iterations: 0,
        residual: 0.0,
        psor_max_iterations,
        psor_max_residual,
        raw_fee,
    };

    if loan.v0 >= ind.boundary.levels[0] {
        return Ok(FeeQuote {
            fee: 0.0,
            bank_cost: loan.v0 - loan.principal,
            p0: loan.v0 - loan.principal,
            boundary: Boundary::Curve(ind.boundary),
            diagnostics: diagnostics(FeeBranch::ImmediateExercise, None),
        });
    }

    let cost = bank_cost_pde(
        &ind.boundary,
        market,
        collateral,
        loan,
        &ind.lcp.grid,
        cfg.scheme(),
    )?;
    let raw = loan.principal + cost - loan.v0;
    let grid_tol = 0.005 * loan.principal;
    let (fee, raw_fee) = if raw >= 0.0 {
        (raw, None)
    } else if raw >= -grid_tol {
        (0.0, Some(raw))
    } else {
        return Err(Error::NegativeFee {
            fee: raw,
            tol: grid_tol,
        });
    };
    Ok(FeeQuote {
        fee,
        bank_cost: cost,
        p0: ind.p0,
        boundary: Boundary::Curve(ind.boundary),
        diagnostics: diagnostics(FeeBranch::Continuation, raw_fee),
    })
}

/// Which model parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    Gamma,
    Delta,
    Rho,
    Sigma2,
    V0,
    Principal,
    Maturity,
    Alpha,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gamma" => Ok(Self::Gamma),
            "delta" => Ok(Self::Delta),
            "rho" => Ok(Self::Rho),
            "sigma2" => Ok(Self::Sigma2),
            "v0" => Ok(Self::V0),
            "L" | "principal" => Ok(Self::Principal),
            "T" | "maturity" => Ok(Self::Maturity),
            "alpha" => Ok(Self::Alpha),
            other => Err(format!(
                "unknown sweep axis `{other}` (expected gamma, delta, rho, sigma2, v0, L, T, or alpha)"
            )),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Self::Gamma => "gamma",
            Self::Delta => "delta",
            Self::Rho => "rho",
            Self::Sigma2 => "sigma2",
            Self::V0 => "v0",
            Self::Principal => "L",
            Self::Maturity => "T",
            Self::Alpha => "alpha",
        };
        f.write_str(name)
    }
}

/// Result columns of one sweep row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepValues {
    pub fee: f64,
    pub cost: f64,
    pub p0: f64,
    pub v_star_at_0: f64,
    pub psor_max_iters: usize,
}

/// One sweep row: the axis value plus either results or the error message
/// for that run.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub outcome: std::result::Result<SweepValues, String>,
}

/// Sweep results in input order.
#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str = "axis_value,fee,cost,p0,v_star_at_0,psor_max_iters";

impl SweepTable {
    /// CSV serialisation of the successful rows (errors are reported in the
    /// JSON/text outputs, not in CSV).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            if let Ok(values) = &row.outcome {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    row.axis_value,
                    values.fee,
                    values.cost,
                    values.p0,
                    values.v_star_at_0,
                    values.psor_max_iters
                ));
            }
        }
        out
    }

    /// Parses the CSV produced by [`SweepTable::to_csv`].
    pub fn parse_csv(text: &str) -> std::result::Result<Vec<(f64, SweepValues)>, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(header) if header == SWEEP_CSV_HEADER => {}
            other => return Err(format!("unexpected CSV header: {other:?}")),
        }
        let mut rows = Vec::new();
        for (idx, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(format!("row {}: expected 6 fields, got {}", idx + 2, fields.len()));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| format!("row {}: bad number `{s}`: {e}", idx + 2))
            };
            rows.push((
                num(fields[0])?,
                SweepValues {
                    fee: num(fields[1])?,
                    cost: num(fields[2])?,
                    p0: num(fields[3])?,
                    v_star_at_0: num(fields[4])?,
                    psor_max_iters: fields[5]
                        .parse::<usize>()
                        .map_err(|e| format!("row {}: bad count `{}`: {e}", idx + 2, fields[5]))?,
                },
            ));
        }
        Ok(rows)
    }
}

fn solve_one(
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
    pref: &RiskPreference,
    cfg: &SolverConfig,
) -> Result<SweepValues> {
    let quote = match loan.horizon {
        Horizon::Perpetual => perpetual::fee(market, collateral, loan, pref)?,
        Horizon::Finite { .. } => fee_finite(market, collateral, loan, pref, cfg)?,
    };
    Ok(SweepValues {
        fee: quote.fee,
        cost: quote.bank_cost,
        p0: quote.p0,
        v_star_at_0: quote.boundary.level_at_start(),
        psor_max_iters: quote.diagnostics.psor_max_iterations,
    })
}

fn apply_axis(
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
    pref: &RiskPreference,
    axis: SweepAxis,
    value: f64,
) -> Result<(CollateralModel, LoanTerms, RiskPreference)> {
    let mut collateral = *collateral;
    let mut loan = *loan;
    let mut pref = *pref;
    match axis {
        SweepAxis::Gamma => pref = RiskPreference::new(value)?,
        SweepAxis::Delta => {
            collateral = CollateralModel::new(market, collateral.sigma2(), value, collateral.rho())?
        }
        SweepAxis::Rho => {
            collateral =
                CollateralModel::new(market, collateral.sigma2(), collateral.delta(), value)?
        }
        SweepAxis::Sigma2 => {
            collateral = CollateralModel::new(market, value, collateral.delta(), collateral.rho())?
        }
        SweepAxis::V0 => loan = LoanTerms::new(loan.principal, loan.alpha, value, loan.horizon)?,
        SweepAxis::Principal => {
            loan = LoanTerms::new(value, loan.alpha, loan.v0, loan.horizon)?
        }
        SweepAxis::Maturity => {
            loan = LoanTerms::new(
                loan.principal,
                loan.alpha,
                loan.v0,
                Horizon::Finite { maturity: value },
            )?
        }
        SweepAxis::Alpha => loan = LoanTerms::new(loan.principal, value, loan.v0, loan.horizon)?,
    }
    Ok((collateral, loan, pref))
}

/// Runs one independent solve per axis value; rows come back in input
/// order and per-row failures are recorded without aborting the sweep.
pub fn sweep(
    market: &MarketModel,
    collateral: &CollateralModel,
    loan: &LoanTerms,
    pref: &RiskPreference,
    cfg: &SolverConfig,
    axis: SweepAxis,
    values: &[f64],
) -> SweepTable {
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&value| {
            let outcome = apply_axis(market, collateral, loan, pref, axis, value)
                .and_then(|(c, l, p)| solve_one(market, &c, &l, &p, cfg))
                .map_err(|e| e.to_string());
            SweepRow {
                axis_value: value,
                outcome,
            }
        })
        .collect();
    SweepTable { axis, rows }
}
