use serde::{Deserialize, Serialize};

use super::{conjugate, CmConfig, StateSeries, StepReading};
use crate::channels::QuantumChannel;
use crate::error::{Error, Result};
use crate::renewal::StepSchedule;
use crate::tensor::ComplexMatrix;

type M = ComplexMatrix<f64>;

/// Tuning of the age-structured engine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgeEngineOptions {
    /// Branches lighter than this are dropped and the rest renormalised.
    pub weight_floor: f64,
    pub branch_cap: usize,
    pub reading: StepReading,
}

impl Default for AgeEngineOptions {
    fn default() -> Self {
        Self {
            weight_floor: 1e-12,
            branch_cap: 10_000,
            reading: StepReading::Age,
        }
    }
}

impl AgeEngineOptions {
    /// Exact bookkeeping: nothing is pruned.
    pub fn exact() -> Self {
        Self {
            weight_floor: 0.0,
            ..Self::default()
        }
    }
}

/// One conditional S⊗M state.
#[derive(Clone, Debug)]
pub struct Branch {
    /// Steps since the last jump, not counting the current one.
    pub age: usize,
    pub weight: f64,
    /// Unit-trace conditional state.
    pub state: M,
    /// `jump_weights[j]`: part of `weight` carried by histories with `j` jumps.
    pub jump_weights: Vec<f64>,
}

/// Weighted family of conditional states after some step.
#[derive(Clone, Debug)]
pub struct AgeStructuredState {
    pub step: usize,
    pub branches: Vec<Branch>,
}

impl AgeStructuredState {
    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }

    /// `Σ w_a ρ_a`.
    pub fn ensemble(&self) -> M {
        let n = self.branches[0].state.rows();
        let mut acc = M::zeros(n, n);
        for b in &self.branches {
            acc.add_scaled(num_complex::Complex::new(b.weight, 0.0), &b.state);
        }
        acc
    }

    /// Total weight of histories with exactly `j` jumps, for each `j`.
    pub fn jump_count_weights(&self) -> Vec<f64> {
        let len = self.branches.iter().map(|b| b.jump_weights.len()).max().unwrap_or(0);
        let mut out = vec![0.0; len];
        for b in &self.branches {
            for (j, w) in b.jump_weights.iter().enumerate() {
                out[j] += w;
            }
        }
        out
    }
}

/// Stepper for the age-structured branch decomposition.
pub struct AgeEngine {
    options: AgeEngineOptions,
    schedule: StepSchedule,
    u: M,
    u_dag: M,
    jump: QuantumChannel<f64>,
    current: AgeStructuredState,
    pruned_weight: f64,
}

impl AgeEngine {
    pub fn new(config: &CmConfig, options: AgeEngineOptions) -> Result<Self> {
        config.validate()?;
        if !(options.weight_floor >= 0.0 && options.weight_floor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "weight floor {} outside [0, 1)",
                options.weight_floor
            )));
        }
        let u = config.step_unitary()?;
        let jump = config.bipartite_jump()?;
        jump.require_trace_preserving()?;
        Ok(Self {
            options,
            schedule: config.schedule()?,
            u_dag: u.adjoint(),
            u,
            jump,
            current: AgeStructuredState {
                step: 0,
                branches: vec![Branch {
                    age: 0,
                    weight: 1.0,
                    state: config.initial_state(),
                    jump_weights: vec![1.0],
                }],
            },
            pruned_weight: 0.0,
        })
    }

    pub fn state(&self) -> &AgeStructuredState {
        &self.current
    }

    /// Total weight removed by the floor so far.
    pub fn pruned_weight(&self) -> f64 {
        self.pruned_weight
    }

    fn no_jump_prob(&self, age: usize, collision: usize) -> f64 {
        match self.options.reading {
            StepReading::Age => self.schedule.p(age),
            StepReading::Absolute => self.schedule.p(collision - 1),
        }
    }

    /// Advances one step.
    pub fn step(&mut self) -> Result<()> {
        let step = self.current.step + 1;
        if step > self.schedule.len() {
            return Err(Error::InvalidParameter(format!(
                "step {step} beyond the configured {} steps",
                self.schedule.len()
            )));
        }
        let mut branches = if step == 1 {
            std::mem::take(&mut self.current.branches)
        } else {
            self.collide(step - 1)?
        };
        for b in &mut branches {
            b.state = conjugate(&b.state, &self.u, &self.u_dag);
        }
        self.current = AgeStructuredState { step, branches };
        Ok(())
    }

    fn collide(&mut self, collision: usize) -> Result<Vec<Branch>> {
        let old = std::mem::take(&mut self.current.branches);
        let n = old[0].state.rows();
        let max_jumps = old.iter().map(|b| b.jump_weights.len()).max().unwrap_or(1);
        let mut out = Vec::with_capacity(old.len() + 1);
        let mut jump_mix = M::zeros(n, n);
        let mut jump_weight = 0.0;
        let mut jump_hist = vec![0.0; max_jumps + 1];
        for b in old {
            let p = self.no_jump_prob(b.age, collision);
            let q = 1.0 - p;
            if q > 0.0 && b.weight > 0.0 {
                let w = b.weight * q;
                jump_mix.add_scaled(num_complex::Complex::new(w, 0.0), &b.state);
                jump_weight += w;
                for (j, x) in b.jump_weights.iter().enumerate() {
                    jump_hist[j + 1] += x * q;
                }
            }
            if p > 0.0 {
                out.push(Branch {
                    age: b.age + 1,
                    weight: b.weight * p,
                    jump_weights: b.jump_weights.iter().map(|x| x * p).collect(),
                    state: b.state,
                });
            }
        }
        if jump_weight > 0.0 {
            let state = self.jump.apply_operator(&jump_mix.scale_real(1.0 / jump_weight))?;
            out.push(Branch {
                age: 0,
                weight: jump_weight,
                state,
                jump_weights: jump_hist,
            });
        }
        self.prune(&mut out);
        if out.len() > self.options.branch_cap {
            return Err(Error::BranchCap {
                count: out.len(),
                cap: self.options.branch_cap,
            });
        }
        Ok(out)
    }

    fn prune(&mut self, branches: &mut Vec<Branch>) {
        let floor = self.options.weight_floor;
        if floor <= 0.0 {
            return;
        }
        let before: f64 = branches.iter().map(|b| b.weight).sum();
        branches.retain(|b| b.weight >= floor);
        let after: f64 = branches.iter().map(|b| b.weight).sum();
        if after < before {
            self.pruned_weight += before - after;
            let scale = before / after;
            for b in branches.iter_mut() {
                b.weight *= scale;
                for x in &mut b.jump_weights {
                    *x *= scale;
                }
            }
        }
    }
}

/// Output of [`run_generalized_cm_age`].
#[derive(Clone, Debug)]
pub struct AgeRun {
    /// Ensemble-averaged S⊗M states.
    pub ensemble: StateSeries,
    /// Branch count after each step (index 0: initial state).
    pub branch_counts: Vec<usize>,
    /// Jump-count weights after each step.
    pub jump_count_weights: Vec<Vec<f64>>,
    pub pruned_weight: f64,
}

/// Runs the age-structured engine for `config.n_steps` steps.
pub fn run_generalized_cm_age(config: &CmConfig, options: AgeEngineOptions) -> Result<AgeRun> {
    let mut engine = AgeEngine::new(config, options)?;
    let mut states = vec![engine.state().ensemble()];
    let mut branch_counts = vec![1];
    let mut jump_count_weights = vec![engine.state().jump_count_weights()];
    for _ in 0..config.n_steps {
        engine.step()?;
        let st = engine.state();
        states.push(st.ensemble());
        branch_counts.push(st.branches.len());
        jump_count_weights.push(st.jump_count_weights());
    }
    Ok(AgeRun {
        ensemble: StateSeries {
            tau: config.tau,
            layout: config.layout(),
            states,
        },
        branch_counts,
        jump_count_weights,
        pruned_weight: engine.pruned_weight(),
    })
}
