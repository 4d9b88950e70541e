use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{conjugate, CmConfig, StateSeries, StepReading};
use crate::error::{Error, Result};
use crate::stats::MatrixMoments;
use crate::tensor::{partial_trace, ComplexMatrix};

type M = ComplexMatrix<f64>;

const CHUNK: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryOptions {
    pub reading: StepReading,
    /// Store the reduced S state every this many steps (`None`: no snapshots).
    pub snapshot_every: Option<usize>,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            reading: StepReading::Age,
            snapshot_every: None,
        }
    }
}

/// Jump history of one trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub index: u64,
    /// Steps (1-based) at whose start a jump was applied, strictly increasing.
    pub jump_steps: Vec<usize>,
    /// `(step, reduced S state)` pairs, if requested.
    #[serde(skip)]
    pub snapshots: Vec<(usize, M)>,
}

/// Averages and per-entry standard errors over all trajectories.
#[derive(Clone, Debug)]
pub struct TrajectoryRun {
    pub mean: StateSeries,
    /// Mean reduced S states per step.
    pub mean_s: Vec<M>,
    /// Standard error of the real and imaginary parts of each S entry.
    pub stderr_s: Vec<M>,
    pub records: Vec<TrajectoryRecord>,
    pub n_trajectories: usize,
}

impl TrajectoryRun {
    /// Histogram of the final jump count.
    pub fn jump_count_histogram(&self) -> Vec<usize> {
        let max = self.records.iter().map(|r| r.jump_steps.len()).max().unwrap_or(0);
        let mut h = vec![0; max + 1];
        for r in &self.records {
            h[r.jump_steps.len()] += 1;
        }
        h
    }
}

struct Accumulator {
    sum_sm: Vec<M>,
    moments_s: MatrixMoments,
    records: Vec<TrajectoryRecord>,
}

impl Accumulator {
    fn new(steps: usize, d_sm: usize, d_s: usize) -> Self {
        Self {
            sum_sm: vec![M::zeros(d_sm, d_sm); steps + 1],
            moments_s: MatrixMoments::new(steps + 1, d_s, d_s),
            records: Vec::new(),
        }
    }

    fn add(&mut self, step: usize, sm: &M, s: &M) {
        self.sum_sm[step] += sm;
        self.moments_s.push(step, s);
    }

    fn merge(&mut self, other: Accumulator) {
        for (a, b) in self.sum_sm.iter_mut().zip(&other.sum_sm) {
            *a += b;
        }
        self.moments_s.merge(&other.moments_s);
        self.records.extend(other.records);
    }
}

/// Unravels the collision model into `n_trajectories` stochastic jump
/// histories. Trajectory `i` draws from ChaCha8 seeded with `seed` on stream
/// `i`, so results do not depend on the thread count.
pub fn run_generalized_cm_trajectories(
    config: &CmConfig,
    n_trajectories: usize,
    seed: u64,
    options: TrajectoryOptions,
) -> Result<TrajectoryRun> {
    config.validate()?;
    if n_trajectories == 0 {
        return Err(Error::InvalidParameter("at least one trajectory is required".into()));
    }
    let schedule = config.schedule()?;
    let u = config.step_unitary()?;
    let u_dag = u.adjoint();
    let jump = config.bipartite_jump()?;
    jump.require_trace_preserving()?;
    let layout = config.layout();
    let rho_init = config.initial_state();
    let n_steps = config.n_steps;
    let d_sm = rho_init.rows();
    let d_s = config.d_s();

    let run_one = |index: usize, acc: &mut Accumulator| -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let mut rho = rho_init.clone();
        let mut age = 0usize;
        let mut jump_steps = Vec::new();
        let mut snapshots = Vec::new();
        let reduce = |m: &M| partial_trace(m, &layout, &["S"]);
        acc.moments_s.begin_sample();
        acc.add(0, &rho, &reduce(&rho)?);
        for step in 1..=n_steps {
            if step >= 2 {
                let collision = step - 1;
                let p = match options.reading {
                    StepReading::Age => schedule.p(age),
                    StepReading::Absolute => schedule.p(collision - 1),
                };
                let u01: f64 = rng.random();
                if u01 >= p {
                    rho = jump.apply_operator(&rho)?;
                    age = 0;
                    jump_steps.push(step);
                } else {
                    age += 1;
                }
            }
            rho = conjugate(&rho, &u, &u_dag);
            let s = reduce(&rho)?;
            if let Some(every) = options.snapshot_every {
                if every > 0 && step % every == 0 {
                    snapshots.push((step, s.clone()));
                }
            }
            acc.add(step, &rho, &s);
        }
        acc.records.push(TrajectoryRecord {
            seed,
            index: index as u64,
            jump_steps,
            snapshots,
        });
        Ok(())
    };

    let chunks: Vec<Result<Accumulator>> = (0..n_trajectories.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Accumulator::new(n_steps, d_sm, d_s);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_trajectories) {
                run_one(i, &mut acc)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = Accumulator::new(n_steps, d_sm, d_s);
    for c in chunks {
        total.merge(c?);
    }

    let n = n_trajectories as f64;
    let mean_sm: Vec<M> = total.sum_sm.iter().map(|m| m.scale_real(1.0 / n)).collect();
    let stderr_s = total.moments_s.standard_errors();
    let mean_s = total.moments_s.means().to_vec();
    Ok(TrajectoryRun {
        mean: StateSeries {
            tau: config.tau,
            layout,
            states: mean_sm,
        },
        mean_s,
        stderr_s,
        records: total.records,
        n_trajectories,
    })
}
