//! `pwcm run`: executes the requested engines and evaluators, checks the
//! invariants of everything they emit and writes one CSV per run.

use std::time::Instant;

use piecewise_cm::channels::QuantumChannel;
use piecewise_cm::engines::{
    memoryless_channel, run_full_chain_oracle, run_generalized_cm_age, run_generalized_cm_trajectories,
    run_memory_cm_sec3, CmConfig, Sec3Options, TrajectoryOptions,
};
use piecewise_cm::evaluators::{
    blp_witness_scan, dyson_markovian, lindblad_evolve, mc_piecewise, memory_kernel_residual,
    volterra_piecewise_with, PiecewiseSpec, VolterraOptions,
};
use piecewise_cm::stats::StatComparison;
use piecewise_cm::tensor::{psd_check, trace_distance_matrices};
use piecewise_cm::verify::{run_verify_suite, VerifyOptions};
use piecewise_cm::CMatrix;
use serde_json::json;

use crate::config::{ComparisonRequest, RunRequest, Scenario};
use crate::output::{matrix_columns, matrix_values, Check, RunEntry, RunReport, Table, Timings};

/// Trace tolerance for exact engines.
pub const ENGINE_TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const CPT_TOL: f64 = 1e-10;

/// Reduced S states of one run, for comparisons.
#[derive(Clone, Debug)]
pub struct Series {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub stderr: Option<Vec<CMatrix>>,
    /// Trace before any renormalisation, when it differs from the state's.
    pub raw_traces: Option<Vec<f64>>,
}

impl Series {
    fn exact(times: Vec<f64>, states: Vec<CMatrix>) -> Self {
        Self {
            times,
            states,
            stderr: None,
            raw_traces: None,
        }
    }

    pub fn table(&self) -> Table {
        let d = self.states.first().map_or(0, CMatrix::rows);
        let mut cols = vec!["time".to_string(), "trace".to_string()];
        cols.extend(matrix_columns("rho", d));
        if self.stderr.is_some() {
            cols.extend(matrix_columns("se", d));
        }
        let mut t = Table::new(cols);
        for (k, (time, m)) in self.times.iter().zip(&self.states).enumerate() {
            let trace = self.raw_traces.as_ref().map_or(m.trace().re, |r| r[k]);
            let mut row = vec![*time, trace];
            row.extend(matrix_values(m));
            if let Some(se) = &self.stderr {
                row.extend(matrix_values(&se[k]));
            }
            t.push(row);
        }
        t
    }
}

/// Trace and positivity checks over a list of states.
pub fn state_checks(prefix: &str, states: &[CMatrix], trace_tol: f64) -> Vec<Check> {
    let trace_dev = states.iter().map(|m| (m.trace().re - 1.0).abs()).fold(0.0, f64::max);
    let neg = states
        .iter()
        .map(|m| match psd_check(m, PSD_TOL) {
            Ok(r) => (-r.min_eigenvalue).max(0.0),
            Err(_) => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    vec![
        Check::at_most(
            format!("{prefix}.trace"),
            trace_dev,
            trace_tol,
            format!("max |Tr ρ − 1| over {} states", states.len()),
        ),
        Check::at_most(
            format!("{prefix}.psd"),
            neg,
            PSD_TOL,
            format!("max(−λ_min) over {} states", states.len()),
        ),
    ]
}

fn cpt_check(name: &str, channels: &[(&str, QuantumChannel<f64>)]) -> Check {
    let mut worst: f64 = 0.0;
    let mut failed = Vec::new();
    for (label, ch) in channels {
        match ch.verify_cpt(CPT_TOL) {
            Ok(r) => {
                let v = (-r.min_choi_eig).max(0.0).max(r.tp_residual);
                if !r.is_cpt() {
                    failed.push(*label);
                }
                worst = worst.max(v);
            }
            Err(_) => {
                failed.push(*label);
                worst = f64::INFINITY;
            }
        }
    }
    let names: Vec<&str> = channels.iter().map(|c| c.0).collect();
    let mut c = Check::at_most(
        name,
        worst,
        CPT_TOL,
        format!("max(−λ_min(Choi), TP residual) over {}", names.join(", ")),
    );
    c.passed &= failed.is_empty();
    c
}

/// Result of one run: its series (if any), CSV tables, checks and metrics.
struct RunOutput {
    series: Option<Series>,
    tables: Vec<(String, Table)>,
    checks: Vec<Check>,
    metrics: serde_json::Value,
}

impl RunOutput {
    fn series(id: &str, series: Series, checks: Vec<Check>, metrics: serde_json::Value) -> Self {
        Self {
            tables: vec![(format!("{id}.csv"), series.table())],
            series: Some(series),
            checks,
            metrics,
        }
    }
}

fn reduce_all(cm: &CmConfig, states: &[CMatrix]) -> piecewise_cm::Result<Vec<CMatrix>> {
    states.iter().map(|m| cm.reduce(m)).collect()
}

fn execute(
    scenario: &Scenario,
    run: &RunRequest,
    corrupt_swap: bool,
) -> piecewise_cm::Result<RunOutput> {
    let cm = &scenario.cm;
    let id = run.id();
    let seed = scenario.seed.unwrap_or(0);
    let horizon_or = |h: &Option<f64>| h.unwrap_or_else(|| scenario.horizon());
    Ok(match run {
        RunRequest::Age { reading, weight_floor, .. } => {
            let out = run_generalized_cm_age(cm, Scenario::age_options(*reading, *weight_floor))?;
            let checks = state_checks(&id, &out.ensemble.states, ENGINE_TRACE_TOL);
            let metrics = json!({
                "pruned_weight": out.pruned_weight,
                "max_branches": out.branch_counts.iter().max(),
            });
            let series = Series::exact(out.ensemble.times(), reduce_all(cm, &out.ensemble.states)?);
            RunOutput::series(&id, series, checks, metrics)
        }
        RunRequest::FullChain { ancillas, reading, .. } => {
            let steps = cm.n_steps.min(ancillas + 1);
            let out = run_full_chain_oracle(&cm.with_steps(cm.tau, steps), *ancillas, *reading)?;
            let checks = state_checks(&id, &out.states, ENGINE_TRACE_TOL);
            let series = Series::exact(out.times(), reduce_all(cm, &out.states)?);
            RunOutput::series(&id, series, checks, json!({ "steps": steps }))
        }
        RunRequest::Trajectories { n_trajectories, reading, .. } => {
            let opts = TrajectoryOptions {
                reading: *reading,
                ..TrajectoryOptions::default()
            };
            let out = run_generalized_cm_trajectories(cm, *n_trajectories, seed, opts)?;
            let mut checks = state_checks(&id, &out.mean.states, ENGINE_TRACE_TOL);
            checks.extend(state_checks(&format!("{id}.reduced"), &out.mean_s, ENGINE_TRACE_TOL));
            let hist = out.jump_count_histogram();
            let series = Series {
                times: out.mean.times(),
                states: out.mean_s,
                stderr: Some(out.stderr_s),
                raw_traces: None,
            };
            RunOutput::series(&id, series, checks, json!({ "n_trajectories": n_trajectories, "jump_count_histogram": hist }))
        }
        RunRequest::Sec3 { insert_jump_map, .. } => {
            let out = run_memory_cm_sec3(
                cm,
                Sec3Options {
                    insert_jump_map: *insert_jump_map,
                },
            )?;
            let checks = state_checks(&id, &out.states, ENGINE_TRACE_TOL);
            let series = Series::exact(out.times(), reduce_all(cm, &out.states)?);
            RunOutput::series(&id, series, checks, json!({ "p": (-cm.hazard.constant_rate().unwrap_or(0.0) * cm.tau).exp() }))
        }
        RunRequest::Memoryless { .. } => {
            // Repeated S–ancilla collisions with no memory: ρ ↦ Tr_n₁[V(ρ⊗ξ)V†].
            let phi = memoryless_channel(&cm.xi, &cm.v)?;
            let mut states = vec![cm.rho0.matrix().clone()];
            for _ in 0..cm.n_steps {
                let next = phi.apply_operator(states.last().expect("nonempty"))?;
                states.push(next);
            }
            let mut checks = state_checks(&id, &states, ENGINE_TRACE_TOL);
            checks.push(cpt_check(&format!("{id}.cpt"), &[("memoryless collision", phi)]));
            let times = (0..=cm.n_steps).map(|n| n as f64 * cm.tau).collect();
            RunOutput::series(&id, Series::exact(times, states), checks, json!({}))
        }
        RunRequest::Volterra {
            n_grid,
            horizon,
            ordering,
            max_jumps,
            kernel_residual,
            ..
        } => {
            let spec = PiecewiseSpec::from_config(cm, horizon_or(horizon), *n_grid, *ordering)?;
            let out = volterra_piecewise_with(&spec, &cm.rho0, VolterraOptions { max_jumps: *max_jumps })?;
            let h = spec.step();
            let mut checks = Vec::new();
            let raw_dev = out.raw_traces.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max);
            if max_jumps.is_some() {
                checks.push(Check::skipped(
                    format!("{id}.trace"),
                    "truncated series: the trace deficit is the dropped jump orders",
                ));
            } else {
                checks.push(Check::at_most(
                    format!("{id}.trace"),
                    raw_dev,
                    10.0 * h * h,
                    "max |Tr ρ − 1| before renormalisation, bound 10h²",
                ));
            }
            checks.push(state_checks(&id, &out.states, f64::INFINITY).remove(1));
            let mut metrics = json!({
                "step": h,
                "max_renormalization": out.max_renormalization,
                "coarse_grid_warning": out.coarse_grid_warning,
            });
            let mut tables = Vec::new();
            if *kernel_residual {
                let res = memory_kernel_residual(&spec, &cm.rho0, &out)?;
                metrics["kernel_residual_max"] = json!(res.max);
                let mut t = Table::new(vec!["time".into(), "residual".into()]);
                for (time, r) in res.times.iter().zip(&res.residuals) {
                    t.push(vec![*time, *r]);
                }
                tables.push((format!("{id}_residual.csv"), t));
            }
            let series = Series {
                times: out.times.clone(),
                states: out.states.clone(),
                stderr: None,
                raw_traces: Some(out.raw_traces.clone()),
            };
            tables.insert(0, (format!("{id}.csv"), series.table()));
            RunOutput {
                series: Some(series),
                tables,
                checks,
                metrics,
            }
        }
        RunRequest::McPiecewise {
            n_grid,
            horizon,
            ordering,
            n_trajectories,
            stride,
            ..
        } => {
            let spec = PiecewiseSpec::from_config(cm, horizon_or(horizon), *n_grid, *ordering)?;
            let indices: Vec<usize> = (0..=*n_grid).step_by(*stride).collect();
            let out = mc_piecewise(&spec, &cm.rho0, *n_trajectories, seed, &indices)?;
            let checks = state_checks(&id, &out.mean, ENGINE_TRACE_TOL);
            let series = Series {
                times: out.times,
                states: out.mean,
                stderr: Some(out.stderr),
                raw_traces: None,
            };
            RunOutput::series(&id, series, checks, json!({ "n_trajectories": n_trajectories }))
        }
        RunRequest::Dyson {
            lindblad,
            times,
            j_max,
            n_grid,
            tolerance,
            ..
        } => {
            let mut states = Vec::new();
            let mut exact = Vec::new();
            let mut worst: f64 = 0.0;
            for &t in times {
                let d = dyson_markovian(lindblad, &cm.rho0, t, *j_max, *n_grid)?;
                let e = lindblad_evolve(lindblad, &cm.rho0, t)?.into_matrix();
                worst = worst.max(trace_distance_matrices(&d.state, &e)?);
                states.push(d.state);
                exact.push(e);
            }
            let mut checks = vec![Check::at_most(
                format!("{id}.vs_exponential"),
                worst,
                *tolerance,
                format!("max trace distance to exp(ℒt)ρ₀, j_max = {j_max}, {n_grid} intervals"),
            )];
            checks.push(state_checks(&id, &states, f64::INFINITY).remove(1));
            checks.extend(state_checks(&format!("{id}.exponential"), &exact, ENGINE_TRACE_TOL));
            let t_last = times.iter().cloned().fold(0.0, f64::max);
            checks.push(cpt_check(
                &format!("{id}.cpt"),
                &[("exp(ℒt)", lindblad.channel(t_last)?)],
            ));
            let d = cm.d_s();
            let mut cols = vec!["time".to_string(), "trace".to_string()];
            cols.extend(matrix_columns("rho", d));
            cols.extend(matrix_columns("exact", d));
            let mut table = Table::new(cols);
            for ((t, s), e) in times.iter().zip(&states).zip(&exact) {
                let mut row = vec![*t, s.trace().re];
                row.extend(matrix_values(s));
                row.extend(matrix_values(e));
                table.push(row);
            }
            RunOutput {
                series: Some(Series::exact(times.clone(), states)),
                tables: vec![(format!("{id}.csv"), table)],
                checks,
                metrics: json!({ "max_trace_distance": worst }),
            }
        }
        RunRequest::Witness { .. } => {
            let second = &scenario
                .witness_states
                .iter()
                .find(|(w, _)| *w == id)
                .expect("loaded with the scenario")
                .1;
            let opts = Scenario::age_options(Default::default(), None);
            let first = run_generalized_cm_age(cm, opts)?;
            let other_cm = CmConfig {
                rho0: second.clone(),
                ..cm.clone()
            };
            let other = run_generalized_cm_age(&other_cm, opts)?;
            let mut checks = state_checks(&id, &first.ensemble.states, ENGINE_TRACE_TOL);
            checks.extend(state_checks(&format!("{id}.second"), &other.ensemble.states, ENGINE_TRACE_TOL));
            let a = reduce_all(cm, &first.ensemble.states)?;
            let b = reduce_all(cm, &other.ensemble.states)?;
            let times = first.ensemble.times();
            let scan = blp_witness_scan(&times, &a, &b)?;
            let mut table = Table::new(vec!["time".into(), "trace_distance".into()]);
            for (t, dist) in scan.times.iter().zip(&scan.distances) {
                table.push(vec![*t, *dist]);
            }
            RunOutput {
                series: Some(Series::exact(times, a)),
                tables: vec![(format!("{id}.csv"), table)],
                checks,
                metrics: json!({
                    "revivals": scan.revivals,
                    "backflow": scan.backflow,
                    "has_revival": scan.has_revival(),
                }),
            }
        }
        RunRequest::Verify { draws, .. } => {
            let results = run_verify_suite(
                seed,
                VerifyOptions {
                    corrupt_swap,
                    draws: *draws,
                },
            )?;
            let checks = results
                .into_iter()
                .map(|r| Check::at_most(format!("{id}.{}", r.name), r.value, r.tolerance, r.detail))
                .collect();
            RunOutput {
                series: None,
                tables: Vec::new(),
                checks,
                metrics: json!({ "draws": draws }),
            }
        }
    })
}

fn compare(req: &ComparisonRequest, a: &Series, b: &Series) -> Check {
    let name = format!("compare.{}.{}", req.first, req.second);
    let mut pairs = Vec::new();
    for (i, &t) in a.times.iter().enumerate() {
        if let Some(j) = b.times.iter().position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0)) {
            pairs.push((i, j));
        }
    }
    if pairs.is_empty() {
        return Check::flag(name, false, "no common readout times");
    }
    let stochastic = a.stderr.is_some() || b.stderr.is_some();
    let mut worst_td: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut all_within = true;
    for &(i, j) in &pairs {
        let (x, y) = (&a.states[i], &b.states[j]);
        worst_td = worst_td.max(trace_distance_matrices(x, y).unwrap_or(f64::INFINITY));
        if stochastic {
            // the combined standard error of both sides
            let zero = CMatrix::zeros(x.rows(), x.cols());
            let sa = a.stderr.as_ref().map_or(&zero, |s| &s[i]);
            let sb = b.stderr.as_ref().map_or(&zero, |s| &s[j]);
            let se = CMatrix::from_fn(x.rows(), x.cols(), |r, c| {
                let (p, q) = (sa[(r, c)], sb[(r, c)]);
                num_complex::Complex::new(p.re.hypot(q.re), p.im.hypot(q.im))
            });
            let cmp = StatComparison::new(x, y, &se);
            all_within &= cmp.within(req.sigmas);
            if cmp.combined_stderr > 0.0 {
                worst_ratio = worst_ratio.max(cmp.distance / cmp.combined_stderr);
            }
        }
    }
    let tolerance = req.tolerance.unwrap_or(if stochastic { f64::INFINITY } else { ENGINE_TRACE_TOL });
    let mut c = Check::at_most(
        name,
        worst_td,
        tolerance,
        if stochastic {
            format!(
                "{} common times; max |Δ|/σ {worst_ratio:.3} (bound {}), max trace distance",
                pairs.len(),
                req.sigmas
            )
        } else {
            format!("{} common times; max trace distance", pairs.len())
        },
    );
    c.passed &= all_within;
    c
}

/// Runs every request of the scenario, in order, and writes their tables.
pub fn cmd_run(
    scenario: &Scenario,
    corrupt_swap: bool,
    out: &crate::output::OutputDir,
    timings: &mut Timings,
) -> Result<RunReport, crate::CliError> {
    let cm = &scenario.cm;
    let mut report = RunReport::new(
        "run",
        &scenario.sha256,
        scenario.config.name.clone(),
        scenario.seed,
    );
    let mut channels = Vec::new();
    match (cm.jump_map(), cm.bipartite_jump(), cm.step_unitary().and_then(|u| QuantumChannel::unitary(&u))) {
        (Ok(z), Ok(zt), Ok(u)) => {
            channels.push(("jump map", z));
            channels.push(("bipartite jump", zt));
            channels.push(("step unitary", u));
            report.checks.push(cpt_check("channels.cpt", &channels));
        }
        _ => report.checks.push(Check::flag("channels.cpt", false, "channel construction failed")),
    }

    let mut series: Vec<(String, Series)> = Vec::new();
    for run in &scenario.config.runs {
        let id = run.id();
        let start = Instant::now();
        let result = execute(scenario, run, corrupt_swap);
        timings.seconds.push((id.clone(), start.elapsed().as_secs_f64()));
        match result {
            Ok(o) => {
                let output = o.tables.first().map(|t| t.0.clone());
                for (name, table) in &o.tables {
                    out.write(name, &table.to_csv(&scenario.sha256))?;
                }
                report.checks.extend(o.checks);
                report.runs.push(RunEntry {
                    id: id.clone(),
                    kind: run.kind().into(),
                    status: "ok".into(),
                    output,
                    metrics: o.metrics,
                });
                if let Some(s) = o.series {
                    series.push((id, s));
                }
            }
            Err(e) => report.runs.push(RunEntry {
                id,
                kind: run.kind().into(),
                status: format!("error: {e}"),
                output: None,
                metrics: json!({}),
            }),
        }
    }

    for req in &scenario.config.comparisons {
        let find = |name: &str| series.iter().find(|(id, _)| id == name).map(|(_, s)| s);
        let check = match (find(&req.first), find(&req.second)) {
            (Some(a), Some(b)) => compare(req, a, b),
            _ => Check::flag(
                format!("compare.{}.{}", req.first, req.second),
                false,
                "a compared run produced no state series",
            ),
        };
        report.checks.push(check);
    }
    Ok(report)
}
