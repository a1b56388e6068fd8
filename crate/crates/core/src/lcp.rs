//! Generic 1-D parabolic linear-complementarity engine.
//!
//! Solves, backward in time from a terminal condition,
//!
//! ```text
//!   dF/dt + L F >= 0,      F <= kappa,      (dF/dt + L F) * (F - kappa) = 0,
//! ```
//!
//! where `L = drift(v,t) d/dv + diffusion(v,t) d^2/dv^2 - discount(t)`.
//! Each backward step discretises with a θ-scheme (fully implicit Rannacher
//! start, then Crank–Nicolson by default) and solves the resulting discrete
//! complementarity problem with projected SOR.  Spatial differencing is
//! central, falling back to one-sided per node wherever central weights
//! would break the M-matrix sign pattern that PSOR convergence relies on.

use serde::Serialize;

use crate::error::{Error, Result};

/// Node placement along the `v` axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpacing {
    Uniform,
    /// sinh-stretched spacing clustering nodes around `center`.
    Geometric { center: f64 },
}

/// Space–time grid: `v` from 0 to `v_max`, `t` from 0 to the horizon.
#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    v_nodes: Vec<f64>,
    t_nodes: Vec<f64>,
}

impl Grid {
    pub fn v_nodes(&self) -> &[f64] {
        &self.v_nodes
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t_nodes
    }

    pub fn nv(&self) -> usize {
        self.v_nodes.len()
    }

    pub fn nt(&self) -> usize {
        self.t_nodes.len()
    }

    /// Linear interpolation of nodal `values` at `v` (clamped to the domain).
    pub fn interpolate(&self, values: &[f64], v: f64) -> f64 {
        debug_assert_eq!(values.len(), self.v_nodes.len());
        let nodes = &self.v_nodes;
        if v <= nodes[0] {
            return values[0];
        }
        if v >= *nodes.last().unwrap() {
            return *values.last().unwrap();
        }
        let j = match nodes.binary_search_by(|x| x.partial_cmp(&v).unwrap()) {
            Ok(j) => return values[j],
            Err(j) => j,
        };
        let w = (v - nodes[j - 1]) / (nodes[j] - nodes[j - 1]);
        values[j - 1] * (1.0 - w) + values[j] * w
    }
}

/// Builds a grid with `nv` space nodes on `[0, v_max]` and `nt` uniformly
/// spaced time nodes on `[0, t_max]`.
pub fn build_grid(
    v_max: f64,
    nv: usize,
    t_max: f64,
    nt: usize,
    spacing: GridSpacing,
) -> Result<Grid> {
    if !(v_max > 0.0) || !v_max.is_finite() {
        return Err(Error::InvalidGrid(format!("v_max = {v_max} must be positive")));
    }
    if nv < 3 {
        return Err(Error::InvalidGrid(format!("nv = {nv} must be >= 3")));
    }
    if nt < 2 {
        return Err(Error::InvalidGrid(format!("nt = {nt} must be >= 2")));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidGrid(format!("t_max = {t_max} must be positive")));
    }
    let v_nodes: Vec<f64> = match spacing {
        GridSpacing::Uniform => (0..nv)
            .map(|i| v_max * i as f64 / (nv - 1) as f64)
            .collect(),
        GridSpacing::Geometric { center } => {
            if !(0.0..v_max).contains(&center) {
                return Err(Error::InvalidGrid(format!(
                    "geometric center {center} must lie inside (0, v_max)"
                )));
            }
            let width = v_max / 10.0;
            let xi_min = (-center / width).asinh();
            let xi_max = ((v_max - center) / width).asinh();
            (0..nv)
                .map(|i| {
                    let xi = xi_min + (xi_max - xi_min) * i as f64 / (nv - 1) as f64;
                    center + width * xi.sinh()
                })
                .collect()
        }
    };
    let mut v_nodes = v_nodes;
    v_nodes[0] = 0.0;
    *v_nodes.last_mut().unwrap() = v_max;
    if v_nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("nodes are not strictly increasing".into()));
    }
    let t_nodes = (0..nt)
        .map(|i| t_max * i as f64 / (nt - 1) as f64)
        .collect();
    Ok(Grid { v_nodes, t_nodes })
}

/// Behaviour at the far (`v = v_max`) edge of the domain.
pub enum RightBoundary<'a> {
    /// Prescribed value as a function of time.
    Dirichlet(Box<dyn Fn(f64) -> f64 + Sync + 'a>),
    /// Zero second derivative: the PDE row with the diffusion term dropped.
    ZeroSecondDerivative,
}

/// A backward parabolic complementarity problem on `[0, v_max] x [0, T]`.
///
/// `obstacle` is an upper bound on the solution; return `f64::INFINITY` to
/// leave a node unconstrained.  The terminal condition must respect the
/// obstacle at the horizon.
pub struct LcpProblem<'a> {
    /// First-order coefficient, `(v, t)` in currency/year.
    pub drift: Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>,
    /// Second-order coefficient, `(v, t)` in currency^2/year; must be >= 0.
    pub diffusion: Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>,
    /// Zeroth-order discount rate as a function of time, 1/year.
    pub discount: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
    /// Upper obstacle `kappa(v, t)`.
    pub obstacle: Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>,
    /// Terminal condition at `t = T`.
    pub terminal: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
    /// Dirichlet value at `v = 0` as a function of time.
    pub left_boundary: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
    pub right_boundary: RightBoundary<'a>,
}

/// Time-stepping scheme: θ-weight plus a fully implicit Rannacher start to
/// damp oscillations seeded by kinks in the terminal data.
#[derive(Debug, Clone, Copy)]
pub struct Scheme {
    /// Implicitness weight in [0, 1]: 1 = implicit Euler, 0.5 = Crank–Nicolson.
    pub theta: f64,
    /// Number of initial backward steps forced to θ = 1.
    pub rannacher_steps: usize,
}

impl Default for Scheme {
    fn default() -> Self {
        Self {
            theta: 0.5,
            rannacher_steps: 4,
        }
    }
}

/// Projected SOR controls.  The tolerance applies to the complementarity
/// residual `min(row residual, kappa - F)` relative to the row scale.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PsorParams {
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PsorParams {
    fn default() -> Self {
        Self {
            omega: 1.4,
            tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

/// Solved LCP: full solution surface plus per-step solver diagnostics.
#[derive(Debug, Clone)]
pub struct LcpSolution {
    pub grid: Grid,
    /// `surface[n][i]` is the solution at time node `n`, space node `i`.
    pub surface: Vec<Vec<f64>>,
    /// Whether the obstacle binds at each node.
    pub active_mask: Vec<Vec<bool>>,
    /// PSOR sweeps taken at each backward step (terminal step excluded).
    pub psor_iterations: Vec<usize>,
    /// Largest complementarity residual over all nodes and steps.
    pub max_residual: f64,
}

/// Spatial operator coefficients `(lower, diag, upper)` for one row:
/// `(L f)_i = lower * f_{i-1} + diag * f_i + upper * f_{i+1}`.
///
/// Central drift differencing, switched to the one-sided difference on the
/// upwind side whenever a central weight would turn negative.
pub(crate) fn stencil(
    h_minus: f64,
    h_plus: f64,
    drift: f64,
    diffusion: f64,
    discount: f64,
) -> (f64, f64, f64) {
    let span = h_minus + h_plus;
    let dl = 2.0 * diffusion / (h_minus * span);
    let du = 2.0 * diffusion / (h_plus * span);
    let dd = -2.0 * diffusion / (h_minus * h_plus);

    let cl = -drift * h_plus / (h_minus * span);
    let cu = drift * h_minus / (h_plus * span);
    if dl + cl >= 0.0 && du + cu >= 0.0 {
        let cd = drift * (h_plus - h_minus) / (h_minus * h_plus);
        (dl + cl, dd + cd - discount, du + cu)
    } else if drift >= 0.0 {
        (dl, dd - drift / h_plus - discount, du + drift / h_plus)
    } else {
        (
            dl - drift / h_minus,
            dd + drift / h_minus - discount,
            du,
        )
    }
}

/// Tridiagonal rows of the spatial operator at a fixed time.  Row 0 is the
/// left Dirichlet node and is left empty; the last row depends on the right
/// boundary kind.
pub(crate) struct OperatorRows {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

pub(crate) fn operator_rows(
    grid: &Grid,
    drift: &(dyn Fn(f64, f64) -> f64 + Sync),
    diffusion: &(dyn Fn(f64, f64) -> f64 + Sync),
    discount: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    dirichlet_right: bool,
) -> Result<OperatorRows> {
    let v = grid.v_nodes();
    let n = v.len();
    let mut rows = OperatorRows {
        lower: vec![0.0; n],
        diag: vec![0.0; n],
        upper: vec![0.0; n],
    };
    let disc = discount(t);
    for i in 1..n - 1 {
        let diff = diffusion(v[i], t);
        if diff < 0.0 {
            return Err(Error::InvalidProblem(format!(
                "diffusion is negative at v = {}, t = {}",
                v[i], t
            )));
        }
        let (l, d, u) = stencil(v[i] - v[i - 1], v[i + 1] - v[i], drift(v[i], t), diff, disc);
        rows.lower[i] = l;
        rows.diag[i] = d;
        rows.upper[i] = u;
    }
    if !dirichlet_right {
        // Zero second derivative: drop diffusion, one-sided drift.
        let i = n - 1;
        let h = v[i] - v[i - 1];
        let a = drift(v[i], t);
        rows.lower[i] = -a / h;
        rows.diag[i] = a / h - disc;
    }
    Ok(rows)
}

/// In-place Thomas solve of a tridiagonal system over `lo..=hi`.
/// `rhs` enters as the right-hand side and leaves as the solution.
pub(crate) fn thomas(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    lo: usize,
    hi: usize,
) {
    let n = hi - lo + 1;
    debug_assert!(n >= 1);
    let mut scratch = vec![0.0; n];
    let mut d = diag[lo];
    rhs[lo] /= d;
    for (k, i) in (lo + 1..=hi).enumerate() {
        scratch[k] = upper[i - 1] / d;
        d = diag[i] - lower[i] * scratch[k];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / d;
    }
    for i in (lo..hi).rev() {
        let k = i - lo;
        rhs[i] -= scratch[k] * rhs[i + 1];
    }
}

struct StepSystem {
    /// A = I - θ Δt L over the unknown range, plus identity boundary rows.
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    /// Inclusive range of unknown node indices.
    first: usize,
    last: usize,
}

/// Assembles one backward θ-step given the already-known level `f_next`.
fn assemble_step(
    grid: &Grid,
    problem: &LcpProblem<'_>,
    f_next: &[f64],
    t_n: f64,
    t_np1: f64,
    theta: f64,
) -> Result<StepSystem> {
    let n = grid.nv();
    let dt = t_np1 - t_n;
    let dirichlet_right = matches!(problem.right_boundary, RightBoundary::Dirichlet(_));
    let rows_n = operator_rows(
        grid,
        &*problem.drift,
        &*problem.diffusion,
        &*problem.discount,
        t_n,
        dirichlet_right,
    )?;
    let rows_np1 = operator_rows(
        grid,
        &*problem.drift,
        &*problem.diffusion,
        &*problem.discount,
        t_np1,
        dirichlet_right,
    )?;

    let first = 1;
    let last = if dirichlet_right { n - 2 } else { n - 1 };
    let mut sys = StepSystem {
        lower: vec![0.0; n],
        diag: vec![1.0; n],
        upper: vec![0.0; n],
        rhs: vec![0.0; n],
        first,
        last,
    };
    for i in first..=last {
        sys.lower[i] = -theta * dt * rows_n.lower[i];
        sys.diag[i] = 1.0 - theta * dt * rows_n.diag[i];
        sys.upper[i] = -theta * dt * rows_n.upper[i];
        let explicit = rows_np1.lower[i] * f_next[i - 1]
            + rows_np1.diag[i] * f_next[i]
            + if i + 1 < n {
                rows_np1.upper[i] * f_next[i + 1]
            } else {
                0.0
            };
        sys.rhs[i] = f_next[i] + (1.0 - theta) * dt * explicit;
    }
    // Boundary rows as identities.
    sys.rhs[0] = (problem.left_boundary)(t_n);
    if let RightBoundary::Dirichlet(g) = &problem.right_boundary {
        sys.rhs[n - 1] = g(t_n);
    }
    Ok(sys)
}

/// Complementarity residual `min(b - A x, kappa - x)` scaled per row;
/// returns the largest magnitude over the unknown range.
fn complementarity_residual(sys: &StepSystem, kappa: &[f64], x: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in sys.first..=sys.last {
        let ax = sys.lower[i] * x[i - 1]
            + sys.diag[i] * x[i]
            + if i + 1 < x.len() {
                sys.upper[i] * x[i + 1]
            } else {
                0.0
            };
        let row_residual = sys.rhs[i] - ax;
        let slack = kappa[i] - x[i];
        let r = row_residual.min(slack) / sys.rhs[i].abs().max(1.0);
        worst = worst.max(r.abs());
    }
    worst
}

/// Runs PSOR sweeps on one assembled step until the complementarity
/// residual drops below tolerance.  Returns the per-sweep residual history.
fn psor_iterate(
    sys: &StepSystem,
    kappa: &[f64],
    x: &mut [f64],
    psor: &PsorParams,
) -> Vec<f64> {
    let mut history = Vec::new();
    for _ in 0..psor.max_iter {
        for i in sys.first..=sys.last {
            let neighbors = sys.lower[i] * x[i - 1]
                + if i + 1 < x.len() {
                    sys.upper[i] * x[i + 1]
                } else {
                    0.0
                };
            let gauss_seidel = (sys.rhs[i] - neighbors) / sys.diag[i];
            let relaxed = x[i] + psor.omega * (gauss_seidel - x[i]);
            x[i] = relaxed.min(kappa[i]);
        }
        let residual = complementarity_residual(sys, kappa, x);
        history.push(residual);
        if residual <= psor.tol {
            break;
        }
    }
    history
}

/// Solves the LCP by backward time-marching with θ-scheme + PSOR.
///
/// The solution satisfies, at every interior node and step, row residual
/// >= -tol, `F <= kappa`, and complementarity product below tolerance; the
/// largest violation observed is reported in `max_residual`.
pub fn solve_lcp(
    problem: &LcpProblem<'_>,
    grid: &Grid,
    scheme: Scheme,
    psor: PsorParams,
) -> Result<LcpSolution> {
    if !(0.0..=1.0).contains(&scheme.theta) {
        return Err(Error::InvalidProblem(format!(
            "theta = {} must be in [0, 1]",
            scheme.theta
        )));
    }
    if !(psor.omega > 0.0 && psor.omega < 2.0) {
        return Err(Error::InvalidProblem(format!(
            "omega = {} must be in (0, 2)",
            psor.omega
        )));
    }
    let nv = grid.nv();
    let nt = grid.nt();
    let t = grid.t_nodes().to_vec();
    let horizon = *t.last().unwrap();

    // Terminal level; must respect the obstacle.
    let terminal: Vec<f64> = grid.v_nodes().iter().map(|&v| (problem.terminal)(v)).collect();
    for (i, &v) in grid.v_nodes().iter().enumerate() {
        let cap = (problem.obstacle)(v, horizon);
        if terminal[i] > cap + 1e-9 * terminal[i].abs().max(1.0) {
            return Err(Error::InvalidProblem(format!(
                "terminal value {} exceeds obstacle {} at v = {}",
                terminal[i], cap, v
            )));
        }
    }

    let mut surface = vec![Vec::new(); nt];
    let mut active_mask = vec![Vec::new(); nt];
    let binding = |kappa: f64, x: f64| kappa.is_finite() && kappa - x <= 1e-12 * kappa.abs().max(1.0);
    active_mask[nt - 1] = grid
        .v_nodes()
        .iter()
        .zip(&terminal)
        .map(|(&v, &x)| binding((problem.obstacle)(v, horizon), x))
        .collect();
    surface[nt - 1] = terminal;

    let mut psor_iterations = vec![0; nt - 1];
    let mut max_residual = 0.0f64;

    for n in (0..nt - 1).rev() {
        let step_index = nt - 2 - n;
        let theta = if step_index < scheme.rannacher_steps {
            1.0
        } else {
            scheme.theta
        };
        let sys = assemble_step(grid, problem, &surface[n + 1], t[n], t[n + 1], theta)?;
        let kappa: Vec<f64> = grid
            .v_nodes()
            .iter()
            .map(|&v| (problem.obstacle)(v, t[n]))
            .collect();

        let mut x = surface[n + 1].clone();
        x[0] = sys.rhs[0];
        if matches!(problem.right_boundary, RightBoundary::Dirichlet(_)) {
            x[nv - 1] = sys.rhs[nv - 1];
        }
        // Keep the warm start feasible.
        for i in sys.first..=sys.last {
            x[i] = x[i].min(kappa[i]);
        }

        let history = psor_iterate(&sys, &kappa, &mut x, &psor);
        let residual = *history.last().unwrap_or(&f64::INFINITY);
        if residual > psor.tol {
            return Err(Error::PsorDivergence {
                step: n,
                max_iter: psor.max_iter,
                residual,
                tol: psor.tol,
            });
        }
        psor_iterations[n] = history.len();
        max_residual = max_residual.max(residual);
        active_mask[n] = kappa.iter().zip(&x).map(|(&k, &x)| binding(k, x)).collect();
        surface[n] = x;
    }

    Ok(LcpSolution {
        grid: grid.clone(),
        surface,
        active_mask,
        psor_iterations,
        max_residual,
    })
}

/// Plain θ-scheme solve of the unconstrained PDE (no obstacle), using a
/// direct tridiagonal solve per step.  Reference path for degenerate LCPs
/// and the engine behind the bank-cost PDE.
pub fn theta_solve(problem: &LcpProblem<'_>, grid: &Grid, scheme: Scheme) -> Result<Vec<Vec<f64>>> {
    let nv = grid.nv();
    let nt = grid.nt();
    let t = grid.t_nodes().to_vec();
    let mut surface = vec![Vec::new(); nt];
    surface[nt - 1] = grid.v_nodes().iter().map(|&v| (problem.terminal)(v)).collect();
    for n in (0..nt - 1).rev() {
        let step_index = nt - 2 - n;
        let theta = if step_index < scheme.rannacher_steps {
            1.0
        } else {
            scheme.theta
        };
        let mut sys = assemble_step(grid, problem, &surface[n + 1], t[n], t[n + 1], theta)?;
        // Fold Dirichlet neighbours into the right-hand side.
        let first = sys.first;
        let last = sys.last;
        sys.rhs[first] -= sys.lower[first] * sys.rhs[0];
        sys.lower[first] = 0.0;
        if last + 1 < nv {
            let boundary = sys.rhs[last + 1];
            sys.rhs[last] -= sys.upper[last] * boundary;
            sys.upper[last] = 0.0;
        }
        thomas(&sys.lower, &sys.diag, &sys.upper, &mut sys.rhs, first, last);
        surface[n] = sys.rhs;
    }
    Ok(surface)
}
