//! `stockloan` — price stock loans from an INI configuration.
//!
//! Subcommands: `perpetual` (closed form), `finite` (LCP + PDE pipeline),
//! `sweep` (one axis, many solves), `tables` (regenerate the reference
//! tables with deviations), `oracle-check` (cross-check against the
//! brute-force validators).  Exit codes: 0 success, 1 solver or check
//! failure, 2 configuration error.

mod config;
mod output;
mod reference;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use stockloan_core::{
    finite, oracle, perpetual, Boundary, CollateralModel, ExerciseBoundary, Horizon, LoanTerms,
    MarketModel, RiskPreference, SolverConfig, SweepAxis,
};

use config::{ConfigError, LoadedConfig, RawConfig};
use output::{OracleCheck, OutputFormat, TableRow};

#[derive(Parser)]
#[command(
    name = "stockloan",
    version,
    about = "Stock-loan valuation: utility-indifference pricing of the repayment option and the fair loan fee"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// INI configuration file (see README for the schema).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one configuration value (repeatable), e.g. --set loan.principal=90
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value = "text")]
    output: OutputFormat,

    /// Write the report to a file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form infinite-maturity valuation (requires alpha = r).
    Perpetual,
    /// Finite-maturity valuation: obstacle-problem solve, boundary
    /// extraction, bank-cost PDE, fee.
    Finite,
    /// Repeat the solve along one parameter axis.
    Sweep {
        /// One of: gamma, delta, rho, sigma2, v0, L, T, alpha.
        #[arg(long)]
        axis: String,
        /// Comma list (0.01,0.05,0.08), range with step (80..140..10),
        /// or range with count (80..140:7). A bare range uses 11 points.
        #[arg(long)]
        values: String,
    },
    /// Recompute the built-in reference tables and show deviations.
    Tables,
    /// Cross-check the configured problem against the slow oracles.
    OracleCheck,
}

enum Failure {
    Config(String),
    Solver(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<stockloan_core::Error> for Failure {
    fn from(e: stockloan_core::Error) -> Self {
        Failure::Solver(e.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(Failure::Config(message)) => {
            eprintln!("config error: {message}");
            std::process::exit(2);
        }
        Err(Failure::Solver(message)) => {
            eprintln!("error: {message}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut raw = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            RawConfig::parse(&text, &path.display().to_string())?
        }
        None => RawConfig::default(),
    };
    for spec in &cli.set {
        raw.apply_override(spec)?;
    }

    match &cli.command {
        Command::Perpetual => {
            let cfg = config::load(&raw)?;
            let quote = perpetual::fee(&cfg.market, &cfg.collateral, &cfg.loan, &cfg.pref)?;
            emit(
                &output::solve_report("perpetual", &cfg, &quote, cli.output),
                cli.out.as_deref(),
            )
        }
        Command::Finite => {
            let cfg = config::load(&raw)?;
            let quote = finite::fee_finite(
                &cfg.market,
                &cfg.collateral,
                &cfg.loan,
                &cfg.pref,
                &cfg.solver,
            )?;
            emit(
                &output::solve_report("finite", &cfg, &quote, cli.output),
                cli.out.as_deref(),
            )
        }
        Command::Sweep { axis, values } => {
            let cfg = config::load(&raw)?;
            let axis: SweepAxis = axis
                .parse()
                .map_err(|e: String| Failure::Config(e))?;
            let values = parse_values(values)?;
            let table = finite::sweep(
                &cfg.market,
                &cfg.collateral,
                &cfg.loan,
                &cfg.pref,
                &cfg.solver,
                axis,
                &values,
            );
            emit(
                &output::sweep_report(&cfg, &table, cli.output),
                cli.out.as_deref(),
            )?;
            let failed = table.rows.iter().filter(|r| r.outcome.is_err()).count();
            if failed > 0 {
                return Err(Failure::Solver(format!(
                    "{failed} of {} sweep rows failed",
                    table.rows.len()
                )));
            }
            Ok(())
        }
        Command::Tables => {
            let solver = config::load_solver(&raw)?;
            let rows = compute_tables(&solver)?;
            emit(
                &output::tables_report(&rows, reference::FINITE_TABLE_NOTE, cli.output),
                cli.out.as_deref(),
            )
        }
        Command::OracleCheck => {
            let cfg = config::load(&raw)?;
            let (mode, checks) = run_oracle_checks(&cfg)?;
            emit(
                &output::oracle_report(mode, &checks, cli.output),
                cli.out.as_deref(),
            )?;
            if checks.iter().any(|c| !c.pass) {
                return Err(Failure::Solver("one or more oracle checks failed".into()));
            }
            Ok(())
        }
    }
}

fn emit(report: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, report)
            .map_err(|e| Failure::Solver(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

fn parse_values(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = |detail: String| Failure::Config(format!("--values {spec}: {detail}"));
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| bad(format!("bad number `{s}`: {e}")))
    };
    // lo..hi:count
    if let Some((range, count)) = spec.split_once(':') {
        let Some((lo, hi)) = range.split_once("..") else {
            return Err(bad("expected lo..hi:count".into()));
        };
        let (lo, hi) = (number(lo)?, number(hi)?);
        let count: usize = count
            .trim()
            .parse()
            .map_err(|e| bad(format!("bad count `{count}`: {e}")))?;
        if count < 2 {
            return Err(bad("count must be at least 2".into()));
        }
        return Ok(linspace(lo, hi, count));
    }
    if spec.contains("..") {
        let parts: Vec<&str> = spec.split("..").collect();
        return match parts.as_slice() {
            [lo, hi] => Ok(linspace(number(lo)?, number(hi)?, 11)),
            [lo, hi, step] => {
                let (lo, hi, step) = (number(lo)?, number(hi)?, number(step)?);
                if step <= 0.0 || hi < lo {
                    return Err(bad("need lo <= hi and step > 0".into()));
                }
                let mut values = Vec::new();
                let mut i = 0usize;
                loop {
                    let x = lo + step * i as f64;
                    if x > hi + 1e-9 * step {
                        break;
                    }
                    values.push(x);
                    i += 1;
                }
                Ok(values)
            }
            _ => Err(bad("expected lo..hi, lo..hi..step, or lo..hi:count".into())),
        };
    }
    let values: Result<Vec<f64>, Failure> = spec.split(',').map(|s| number(s)).collect();
    let values = values?;
    if values.is_empty() {
        return Err(bad("no values given".into()));
    }
    Ok(values)
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

fn compute_tables(solver: &SolverConfig) -> Result<Vec<TableRow>, Failure> {
    let market = MarketModel::new(0.05, 0.10, 0.2)?;
    let mut rows = Vec::new();

    for case in &reference::PERPETUAL_CASES {
        let collateral = CollateralModel::new(&market, case.sigma2, case.delta, case.rho_gamma.map(|(rho, _)| rho).unwrap_or(0.0))?;
        for (i, &principal) in reference::PRINCIPALS.iter().enumerate() {
            let loan = LoanTerms::new(principal, 0.05, 100.0, Horizon::Perpetual)?;
            let (fee, threshold) = match case.rho_gamma {
                None => {
                    let quote = perpetual::complete_market_fee(&market, &collateral, &loan)?;
                    let a0 = perpetual::complete_market_threshold(&market, &collateral, &loan)?;
                    (quote.fee, a0.is_finite().then_some(a0))
                }
                Some((_, gamma)) => {
                    let pref = RiskPreference::new(gamma)?;
                    let quote = perpetual::fee(&market, &collateral, &loan, &pref)?;
                    (quote.fee, Some(quote.boundary.level_at_start()))
                }
            };
            rows.push(TableRow {
                table: "perpetual",
                case: case.label.to_string(),
                principal,
                computed_fee: fee,
                reference_fee: case.fees[i],
                computed_threshold: threshold,
                reference_threshold: case.thresholds.map(|t| t[i]),
            });
        }
    }

    let fin = &reference::FINITE_CASE;
    let collateral = CollateralModel::new(&market, fin.sigma2, fin.delta, fin.rho)?;
    let pref = RiskPreference::new(fin.gamma)?;
    for (i, &principal) in reference::PRINCIPALS.iter().enumerate() {
        let loan = LoanTerms::new(
            principal,
            fin.alpha,
            100.0,
            Horizon::Finite {
                maturity: fin.maturity,
            },
        )?;
        let quote = finite::fee_finite(&market, &collateral, &loan, &pref, solver)?;
        rows.push(TableRow {
            table: "finite",
            case: format!(
                "T={}, sigma2={}, rho={}, gamma={}, alpha={}",
                fin.maturity, fin.sigma2, fin.rho, fin.gamma, fin.alpha
            ),
            principal,
            computed_fee: quote.fee,
            reference_fee: fin.fees[i],
            computed_threshold: Some(quote.boundary.level_at_start()),
            reference_threshold: None,
        });
    }
    Ok(rows)
}

fn run_oracle_checks(cfg: &LoadedConfig) -> Result<(&'static str, Vec<OracleCheck>), Failure> {
    let mut checks = Vec::new();
    let mode = match cfg.loan.horizon {
        Horizon::Perpetual => {
            let sol =
                perpetual::solve_threshold(&cfg.market, &cfg.collateral, &cfg.loan, &cfg.pref)?;
            let closed = perpetual::bank_cost(cfg.loan.v0, &sol, &cfg.loan);
            let mc = oracle::mc_barrier_cost(
                &cfg.market,
                &cfg.collateral,
                &cfg.loan,
                &Boundary::Threshold(sol.v_star),
                &cfg.oracle.paths,
                cfg.oracle.t_trunc,
            )?;
            let z = if mc.stderr > 0.0 {
                (mc.estimate - closed).abs() / mc.stderr
            } else {
                (mc.estimate - closed).abs()
            };
            checks.push(OracleCheck {
                name: "monte carlo vs closed-form cost",
                computed: mc.estimate,
                reference: closed,
                measure: z,
                measure_name: "z",
                tolerance: 3.0,
                pass: z <= 3.0,
            });
            "perpetual"
        }
        Horizon::Finite { .. } => {
            let ind = finite::solve_indifference(
                &cfg.market,
                &cfg.collateral,
                &cfg.loan,
                &cfg.pref,
                &cfg.solver,
            )?;
            let tree_f = oracle::tree_stopping_f(
                &cfg.market,
                &cfg.collateral,
                &cfg.loan,
                &cfg.pref,
                5000,
            )?;
            let p_tree = -tree_f.ln() / ind.obstacle.k;
            let gap = (ind.p0 - p_tree).abs();
            checks.push(OracleCheck {
                name: "psor indifference value vs stopping tree",
                computed: ind.p0,
                reference: p_tree,
                measure: gap,
                measure_name: "gap",
                tolerance: 0.05,
                pass: gap <= 0.05,
            });

            let cost = finite::bank_cost_pde(
                &ind.boundary,
                &cfg.market,
                &cfg.collateral,
                &cfg.loan,
                &ind.lcp.grid,
                cfg.solver.scheme(),
            )?;
            let mc = oracle::mc_barrier_cost(
                &cfg.market,
                &cfg.collateral,
                &cfg.loan,
                &Boundary::Curve(ind.boundary.clone()),
                &cfg.oracle.paths,
                cfg.oracle.t_trunc,
            )?;
            let z = if mc.stderr > 0.0 {
                (mc.estimate - cost).abs() / mc.stderr
            } else {
                (mc.estimate - cost).abs()
            };
            checks.push(OracleCheck {
                name: "monte carlo vs pde bank cost",
                computed: mc.estimate,
                reference: cost,
                measure: z,
                measure_name: "z",
                tolerance: 3.0,
                pass: z <= 3.0,
            });
            "finite"
        }
    };

    // Degenerate no-barrier self-check of the PDE engine against the
    // closed-form European value (fixed benchmark parameters).
    let market = MarketModel::new(0.05, 0.10, 0.2)?;
    let collateral = CollateralModel::new(&market, 0.2, 0.0, 0.4)?;
    let loan = LoanTerms::new(100.0, 0.05, 100.0, Horizon::Finite { maturity: 1.0 })?;
    let grid = stockloan_core::lcp::build_grid(
        500.0,
        600,
        1.0,
        600,
        stockloan_core::GridSpacing::Uniform,
    )?;
    let open = ExerciseBoundary {
        times: vec![0.0, 1.0],
        levels: vec![f64::INFINITY, f64::INFINITY],
        detection_tol: 0.0,
    };
    let pde = finite::bank_cost_pde(
        &open,
        &market,
        &collateral,
        &loan,
        &grid,
        stockloan_core::Scheme::default(),
    )?;
    let european = oracle::european_call_closed_form(100.0, 100.0, 0.2, 0.0, 0.0, 1.0);
    let rel = (pde - european).abs() / european;
    checks.push(OracleCheck {
        name: "pde engine vs european closed form",
        computed: pde,
        reference: european,
        measure: rel,
        measure_name: "rel err",
        tolerance: 1e-3,
        pass: rel <= 1e-3,
    });

    Ok((mode, checks))
}
