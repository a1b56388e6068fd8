//! Report rendering: human-readable text, CSV, and versioned JSON.

use clap::ValueEnum;
use serde_json::{json, Value};

use stockloan_core::{FeeBranch, FeeQuote, SweepTable, ValuationMethod};

use crate::config::LoadedConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Csv,
    Json,
}

fn method_name(method: ValuationMethod) -> &'static str {
    match method {
        ValuationMethod::PerpetualClosedForm => "perpetual-closed-form",
        ValuationMethod::CompleteMarketLimit => "complete-market-limit",
        ValuationMethod::FiniteDifference => "finite-difference",
    }
}

fn branch_name(branch: FeeBranch) -> &'static str {
    match branch {
        FeeBranch::Continuation => "continuation",
        FeeBranch::ImmediateExercise => "immediate-exercise",
    }
}

fn parameter_echo(cfg: &LoadedConfig) -> Value {
    json!({
        "market": cfg.market,
        "collateral": {
            "sigma2": cfg.collateral.sigma2(),
            "delta": cfg.collateral.delta(),
            "rho": cfg.collateral.rho(),
            "mu2": cfg.collateral.mu2(),
        },
        "loan": cfg.loan,
        "preference": cfg.pref,
        "solver": cfg.solver,
        "oracle": {
            "n_paths": cfg.oracle.paths.n_paths,
            "n_steps": cfg.oracle.paths.n_steps,
            "seed": cfg.oracle.paths.seed,
            "antithetic": cfg.oracle.paths.antithetic,
            "t_trunc": cfg.oracle.t_trunc,
        },
    })
}

pub fn solve_report(
    mode: &str,
    cfg: &LoadedConfig,
    quote: &FeeQuote,
    format: OutputFormat,
) -> String {
    match format {
        OutputFormat::Json => {
            let value = json!({
                "schema_version": SCHEMA_VERSION,
                "mode": mode,
                "parameters": parameter_echo(cfg),
                "result": quote,
            });
            format!("{}\n", serde_json::to_string_pretty(&value).unwrap())
        }
        OutputFormat::Csv => {
            format!(
                "fee,cost,p0,v_star_at_0,psor_max_iters\n{},{},{},{},{}\n",
                quote.fee,
                quote.bank_cost,
                quote.p0,
                quote.boundary.level_at_start(),
                quote.diagnostics.psor_max_iterations
            )
        }
        OutputFormat::Text => {
            let mut out = String::new();
            out.push_str(&format!("stock loan valuation — {mode}\n"));
            out.push_str(&format!(
                "  loan:       principal = {:.4}, alpha = {:.4}, v0 = {:.4}, {}\n",
                cfg.loan.principal,
                cfg.loan.alpha,
                cfg.loan.v0,
                match cfg.loan.horizon {
                    stockloan_core::Horizon::Perpetual => "perpetual".to_string(),
                    stockloan_core::Horizon::Finite { maturity } =>
                        format!("maturity = {maturity} y"),
                }
            ));
            out.push_str(&format!(
                "  collateral: sigma2 = {:.4}, delta = {:.4}, rho = {:.4} (mu2 = {:.6})\n",
                cfg.collateral.sigma2(),
                cfg.collateral.delta(),
                cfg.collateral.rho(),
                cfg.collateral.mu2(),
            ));
            out.push_str(&format!(
                "  market:     r = {:.4}, mu1 = {:.4}, sigma1 = {:.4}; gamma = {:.4}\n",
                cfg.market.r, cfg.market.mu1, cfg.market.sigma1, cfg.pref.gamma
            ));
            out.push_str(&format!(
                "  exercise level at inception = {:.6}\n",
                quote.boundary.level_at_start()
            ));
            out.push_str(&format!("  indifference value p0 = {:.6}\n", quote.p0));
            out.push_str(&format!("  bank cost C = {:.6}\n", quote.bank_cost));
            out.push_str(&format!("  fee c = {:.6}\n", quote.fee));
            let d = &quote.diagnostics;
            out.push_str(&format!(
                "  method: {}, branch: {}\n",
                method_name(d.method),
                branch_name(d.branch)
            ));
            match d.method {
                ValuationMethod::FiniteDifference => out.push_str(&format!(
                    "  psor: max {} sweeps/step, max residual {:.2e}\n",
                    d.psor_max_iterations, d.psor_max_residual
                )),
                _ => out.push_str(&format!(
                    "  root finder: {} iterations, residual {:.2e}\n",
                    d.iterations, d.residual
                )),
            }
            if let Some(raw) = d.raw_fee {
                out.push_str(&format!(
                    "  note: raw fee {raw:.6} clamped to zero (grid-level noise)\n"
                ));
            }
            out
        }
    }
}

pub fn sweep_report(cfg: &LoadedConfig, table: &SweepTable, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => table.to_csv(),
        OutputFormat::Json => {
            let value = json!({
                "schema_version": SCHEMA_VERSION,
                "mode": "sweep",
                "axis": table.axis.to_string(),
                "parameters": parameter_echo(cfg),
                "rows": table.rows,
            });
            format!("{}\n", serde_json::to_string_pretty(&value).unwrap())
        }
        OutputFormat::Text => {
            let mut out = String::new();
            out.push_str(&format!("sweep over {}\n", table.axis));
            out.push_str(&format!(
                "  {:>12} {:>12} {:>12} {:>12} {:>14} {:>10}\n",
                "axis_value", "fee", "cost", "p0", "v_star_at_0", "psor_iters"
            ));
            for row in &table.rows {
                match &row.outcome {
                    Ok(v) => out.push_str(&format!(
                        "  {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>14.6} {:>10}\n",
                        row.axis_value, v.fee, v.cost, v.p0, v.v_star_at_0, v.psor_max_iters
                    )),
                    Err(message) => out.push_str(&format!(
                        "  {:>12.6} error: {message}\n",
                        row.axis_value
                    )),
                }
            }
            out
        }
    }
}

/// One row of the `tables` comparison.
pub struct TableRow {
    pub table: &'static str,
    pub case: String,
    pub principal: f64,
    pub computed_fee: f64,
    pub reference_fee: f64,
    pub computed_threshold: Option<f64>,
    pub reference_threshold: Option<f64>,
}

pub fn tables_report(rows: &[TableRow], note: &str, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from(
                "table,case,L,computed_fee,reference_fee,fee_deviation,computed_threshold,reference_threshold\n",
            );
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.table,
                    r.case,
                    r.principal,
                    r.computed_fee,
                    r.reference_fee,
                    (r.computed_fee - r.reference_fee).abs(),
                    r.computed_threshold.map(|x| x.to_string()).unwrap_or_default(),
                    r.reference_threshold.map(|x| x.to_string()).unwrap_or_default(),
                ));
            }
            out
        }
        OutputFormat::Json => {
            let value = json!({
                "schema_version": SCHEMA_VERSION,
                "mode": "tables",
                "note": note,
                "rows": rows.iter().map(|r| json!({
                    "table": r.table,
                    "case": r.case,
                    "principal": r.principal,
                    "computed_fee": r.computed_fee,
                    "reference_fee": r.reference_fee,
                    "fee_deviation": (r.computed_fee - r.reference_fee).abs(),
                    "computed_threshold": r.computed_threshold,
                    "reference_threshold": r.reference_threshold,
                })).collect::<Vec<_>>(),
            });
            format!("{}\n", serde_json::to_string_pretty(&value).unwrap())
        }
        OutputFormat::Text => {
            let mut out = String::new();
            let mut current = String::new();
            for r in rows {
                if r.case != current {
                    current = r.case.clone();
                    out.push_str(&format!("\n{} — {}\n", r.table, r.case));
                    out.push_str(&format!(
                        "  {:>5} {:>12} {:>12} {:>9} {:>12} {:>12}\n",
                        "L", "computed c", "reference c", "|dev|", "computed V*", "reference V*"
                    ));
                }
                let threshold = match (r.computed_threshold, r.reference_threshold) {
                    (Some(a), Some(b)) => format!("{a:>12.4} {b:>12.4}"),
                    (Some(a), None) => format!("{a:>12.4} {:>12}", "-"),
                    _ => format!("{:>12} {:>12}", "-", "-"),
                };
                out.push_str(&format!(
                    "  {:>5} {:>12.4} {:>12.4} {:>9.4} {}\n",
                    r.principal,
                    r.computed_fee,
                    r.reference_fee,
                    (r.computed_fee - r.reference_fee).abs(),
                    threshold
                ));
            }
            out.push_str(&format!("\n{note}\n"));
            out
        }
    }
}

/// One oracle cross-check.
pub struct OracleCheck {
    pub name: &'static str,
    pub computed: f64,
    pub reference: f64,
    /// Disagreement in the units of `tolerance` (z-score, gap, ...).
    pub measure: f64,
    pub measure_name: &'static str,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn oracle_report(mode: &str, checks: &[OracleCheck], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out =
                String::from("check,computed,reference,measure,measure_name,tolerance,pass\n");
            for c in checks {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    c.name, c.computed, c.reference, c.measure, c.measure_name, c.tolerance, c.pass
                ));
            }
            out
        }
        OutputFormat::Json => {
            let value = json!({
                "schema_version": SCHEMA_VERSION,
                "mode": "oracle-check",
                "horizon": mode,
                "checks": checks.iter().map(|c| json!({
                    "name": c.name,
                    "computed": c.computed,
                    "reference": c.reference,
                    "measure": c.measure,
                    "measure_name": c.measure_name,
                    "tolerance": c.tolerance,
                    "pass": c.pass,
                })).collect::<Vec<_>>(),
            });
            format!("{}\n", serde_json::to_string_pretty(&value).unwrap())
        }
        OutputFormat::Text => {
            let mut out = format!("oracle check — {mode}\n");
            for c in checks {
                out.push_str(&format!(
                    "  {:38} computed {:>12.6}  reference {:>12.6}  {} = {:.3} (tol {})  {}\n",
                    c.name,
                    c.computed,
                    c.reference,
                    c.measure_name,
                    c.measure,
                    c.tolerance,
                    if c.pass { "PASS" } else { "FAIL" }
                ));
            }
            out
        }
    }
}
