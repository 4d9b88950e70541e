//! `pwcm converge`: error against τ (collision model → continuum series) and
//! memory-kernel residual against the Volterra grid step.

use piecewise_cm::engines::AgeEngineOptions;
use piecewise_cm::evaluators::{
    cm_limit_comparison, memory_kernel_residual, volterra_piecewise, LimitOptions, PiecewiseSpec,
};
use piecewise_cm::stats::{fit_order, OrderFit};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{HSweep, Scenario, TauSweep};
use crate::output::{Check, OutputDir, RunReport, Table, Timings};
use crate::CliError;

#[derive(Debug, Serialize)]
struct FitSummary {
    fit: Option<OrderFit>,
    /// Set when the errors sit at the noise floor and no order is fitted.
    fit_skipped: bool,
}

impl FitSummary {
    fn new(fit: Option<OrderFit>) -> Self {
        Self {
            fit_skipped: fit.is_none(),
            fit,
        }
    }
}

fn tau_sweep(
    scenario: &Scenario,
    sweep: &TauSweep,
    report: &mut RunReport,
    out: &OutputDir,
) -> Result<serde_json::Value, CliError> {
    let options = LimitOptions {
        horizon: sweep.horizon,
        exponents: sweep.exponents[0]..=sweep.exponents[1],
        reference_grid: sweep.reference_grid,
        compare_as_written: true,
        engine: AgeEngineOptions::default(),
    };
    let table = match cm_limit_comparison(&scenario.cm, &options) {
        Ok(t) => t,
        Err(e) => {
            report.checks.push(Check::flag("tau_sweep", false, format!("error: {e}")));
            return Ok(json!({ "error": e.to_string() }));
        }
    };
    let mut csv = Table::new(vec![
        "tau".into(),
        "n_steps".into(),
        "max_error".into(),
        "max_error_as_written".into(),
    ]);
    for r in &table.rows {
        csv.push(vec![
            r.tau,
            r.n_steps as f64,
            r.max_error,
            r.max_error_as_written.unwrap_or(f64::NAN),
        ]);
    }
    out.write("converge_tau.csv", &csv.to_csv(&scenario.sha256))?;

    let summary = FitSummary::new(table.fit);
    match (&table.fit, sweep.expected_order) {
        (None, _) => report.checks.push(Check::skipped(
            "tau_sweep.order",
            "errors at the noise floor; order fit skipped",
        )),
        (Some(fit), Some(expected)) => {
            report.checks.push(Check::at_most(
                "tau_sweep.order",
                (fit.order - expected).abs(),
                sweep.order_tolerance,
                format!("|fitted order {:.4} − {expected}| (R² {:.4})", fit.order, fit.r_squared),
            ));
            report.checks.push(Check::flag(
                "tau_sweep.monotone",
                table.monotone,
                "errors decrease as τ halves",
            ));
        }
        (Some(_), None) => {}
    }
    let renorm_ok = table.reference_renormalization <= piecewise_cm::evaluators::RENORMALIZATION_WARNING;
    report.checks.push(Check::at_most(
        "tau_sweep.reference_renormalization",
        table.reference_renormalization,
        piecewise_cm::evaluators::RENORMALIZATION_WARNING,
        if renorm_ok { "reference grid fine enough" } else { "reference grid too coarse" },
    ));
    Ok(json!({
        "output": "converge_tau.csv",
        "horizon": table.horizon,
        "reference_grid": table.reference_grid,
        "rows": table.rows,
        "fit": summary.fit,
        "fit_skipped": summary.fit_skipped,
        "monotone": table.monotone,
    }))
}

fn h_sweep(
    scenario: &Scenario,
    sweep: &HSweep,
    report: &mut RunReport,
    out: &OutputDir,
) -> Result<serde_json::Value, CliError> {
    let cm = &scenario.cm;
    let points: Vec<piecewise_cm::Result<(f64, f64, f64, f64)>> = sweep
        .grids
        .par_iter()
        .map(|&n| {
            let spec = PiecewiseSpec::from_config(cm, sweep.horizon, n, sweep.ordering)?;
            let sol = volterra_piecewise(&spec, &cm.rho0)?;
            let res = memory_kernel_residual(&spec, &cm.rho0, &sol)?;
            let raw = sol.raw_traces.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max);
            Ok((spec.step(), res.max, sol.max_renormalization, raw))
        })
        .collect();
    let mut rows = Vec::new();
    for (n, p) in sweep.grids.iter().zip(points) {
        match p {
            Ok(v) => rows.push((*n, v)),
            Err(e) => {
                report.checks.push(Check::flag("h_sweep", false, format!("grid {n}: {e}")));
                return Ok(json!({ "error": e.to_string() }));
            }
        }
    }
    let mut csv = Table::new(vec![
        "n_grid".into(),
        "h".into(),
        "residual_max".into(),
        "max_renormalization".into(),
    ]);
    for (n, (h, r, renorm, raw)) in &rows {
        csv.push(vec![*n as f64, *h, *r, *renorm]);
        report.checks.push(Check::at_most(
            format!("h_sweep.{n}.trace"),
            *raw,
            10.0 * h * h,
            "max |Tr ρ − 1| before renormalisation, bound 10h²",
        ));
    }
    out.write("converge_h.csv", &csv.to_csv(&scenario.sha256))?;

    let hs: Vec<f64> = rows.iter().map(|r| r.1 .0).collect();
    let res: Vec<f64> = rows.iter().map(|r| r.1 .1).collect();
    let summary = FitSummary::new(fit_order(&hs, &res));
    let ratios: Vec<f64> = res.windows(2).map(|w| w[0] / w[1]).collect();
    match (&summary.fit, sweep.min_order) {
        (None, _) => report.checks.push(Check::skipped(
            "h_sweep.order",
            "residuals at the noise floor; order fit skipped",
        )),
        (Some(fit), Some(min)) => report.checks.push(Check::at_least(
            "h_sweep.order",
            fit.order,
            min,
            format!("fitted residual order (R² {:.4}) at least the bound", fit.r_squared),
        )),
        (Some(_), None) => {}
    }
    Ok(json!({
        "output": "converge_h.csv",
        "horizon": sweep.horizon,
        "ordering": sweep.ordering,
        "grids": sweep.grids,
        "residuals": res,
        "halving_ratios": ratios,
        "fit": summary.fit,
        "fit_skipped": summary.fit_skipped,
    }))
}

pub fn cmd_converge(scenario: &Scenario, out: &OutputDir, timings: &mut Timings) -> Result<RunReport, CliError> {
    let mut report = RunReport::new("converge", &scenario.sha256, scenario.config.name.clone(), scenario.seed);
    let Some(cv) = &scenario.config.converge else {
        return Err(CliError::Schema("converge needs a `converge` section with tau_sweep or h_sweep".into()));
    };
    if cv.tau_sweep.is_none() && cv.h_sweep.is_none() {
        return Err(CliError::Schema("converge section requests no sweep".into()));
    }
    let mut summary = serde_json::Map::new();
    if let Some(ts) = &cv.tau_sweep {
        let start = std::time::Instant::now();
        summary.insert("tau_sweep".into(), tau_sweep(scenario, ts, &mut report, out)?);
        timings.seconds.push(("tau_sweep".into(), start.elapsed().as_secs_f64()));
    }
    if let Some(hs) = &cv.h_sweep {
        let start = std::time::Instant::now();
        summary.insert("h_sweep".into(), h_sweep(scenario, hs, &mut report, out)?);
        timings.seconds.push(("h_sweep".into(), start.elapsed().as_secs_f64()));
    }
    report.convergence = Some(serde_json::Value::Object(summary));
    Ok(report)
}
