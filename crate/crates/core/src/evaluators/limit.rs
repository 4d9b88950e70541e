//! Convergence of the collision model to the continuous jump series as the
//! collision time shrinks.

use serde::Serialize;

use super::piecewise::{volterra_piecewise, PiecewiseSpec, WeightOrdering};
use crate::engines::{run_generalized_cm_age, AgeEngineOptions, CmConfig};
use crate::error::{Error, Result};
use crate::stats::{fit_order, OrderFit};
use crate::tensor::trace_distance_matrices;

#[derive(Clone, Debug)]
pub struct LimitOptions {
    pub horizon: f64,
    /// `τ = horizon / 2^e` for `e` in this range.
    pub exponents: std::ops::RangeInclusive<u32>,
    /// Volterra grid intervals; must be a multiple of `2^max exponent`.
    pub reference_grid: usize,
    /// Also report the distance to the as-written weight ordering.
    pub compare_as_written: bool,
    pub engine: AgeEngineOptions,
}

impl LimitOptions {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            exponents: 4..=9,
            reference_grid: 2048,
            compare_as_written: true,
            engine: AgeEngineOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitRow {
    pub tau: f64,
    pub n_steps: usize,
    /// Max trace distance to the renewal-ordered series over `t = nτ`.
    pub max_error: f64,
    /// Same against the as-written ordering, if requested.
    pub max_error_as_written: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitTable {
    pub horizon: f64,
    pub reference_grid: usize,
    pub rows: Vec<LimitRow>,
    /// Fit of `log error` against `log τ`; absent when errors sit at the
    /// numerical noise floor.
    pub fit: Option<OrderFit>,
    /// Errors strictly decrease as τ halves.
    pub monotone: bool,
    /// Largest readout renormalisation of the reference solution.
    pub reference_renormalization: f64,
}

/// Runs the age engine for each τ, reduces to S and compares to the Volterra
/// solution of the matching continuum spec at the collision times.
pub fn cm_limit_comparison(config: &CmConfig, options: &LimitOptions) -> Result<LimitTable> {
    config.validate()?;
    let max_e = *options.exponents.end();
    let finest = 1usize << max_e;
    if !options.reference_grid.is_multiple_of(finest) {
        return Err(Error::InvalidParameter(format!(
            "reference grid {} is not a multiple of {finest}",
            options.reference_grid
        )));
    }
    let spec = PiecewiseSpec::from_config(config, options.horizon, options.reference_grid, WeightOrdering::Renewal)?;
    let reference = volterra_piecewise(&spec, &config.rho0)?;
    let as_written = if options.compare_as_written {
        Some(volterra_piecewise(&spec.with_ordering(WeightOrdering::AsWritten), &config.rho0)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    for e in options.exponents.clone() {
        let n_steps = 1usize << e;
        let tau = options.horizon / n_steps as f64;
        let run = run_generalized_cm_age(&config.with_steps(tau, n_steps), options.engine)?;
        let reduced = run.ensemble.reduced("S")?;
        let stride = options.reference_grid / n_steps;
        let mut max_error: f64 = 0.0;
        let mut max_aw: f64 = 0.0;
        for (n, s) in reduced.iter().enumerate() {
            let k = n * stride;
            max_error = max_error.max(trace_distance_matrices(s, &reference.states[k])?);
            if let Some(aw) = &as_written {
                max_aw = max_aw.max(trace_distance_matrices(s, &aw.states[k])?);
            }
        }
        rows.push(LimitRow {
            tau,
            n_steps,
            max_error,
            max_error_as_written: as_written.as_ref().map(|_| max_aw),
        });
    }
    let taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.max_error).collect();
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    Ok(LimitTable {
        horizon: options.horizon,
        reference_grid: options.reference_grid,
        fit: fit_order(&taus, &errs),
        monotone,
        rows,
        reference_renormalization: reference.max_renormalization,
    })
}
