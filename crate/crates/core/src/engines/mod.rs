//! Discrete collision-model dynamics of a system S with memory M.
//!
//! All engines share the step convention: step 1 applies the S–M unitary
//! `U_τ` alone, every later step applies one collision followed by `U_τ`.
//! Collision `ℓ` therefore happens at time `ℓτ`, between steps `ℓ` and `ℓ+1`.

mod age;
mod full_chain;
mod memoryless;
mod sec3;
mod trajectories;

pub use age::{run_generalized_cm_age, AgeEngine, AgeEngineOptions, AgeRun, AgeStructuredState, Branch};
pub use full_chain::{run_full_chain_oracle, FULL_CHAIN_MAX_ANCILLAS};
pub use memoryless::{memoryless_channel, run_memoryless_cm};
pub use sec3::{run_memory_cm_sec3, Sec3Options};
pub use trajectories::{run_generalized_cm_trajectories, TrajectoryOptions, TrajectoryRecord, TrajectoryRun};

use serde::{Deserialize, Serialize};

use crate::channels::{jump_map_z, ztilde_reduced, QuantumChannel};
use crate::error::{Error, Result};
use crate::renewal::{HazardSpec, StepSchedule};
use crate::tensor::{partial_trace, unitary_propagator, ComplexMatrix, DensityMatrix, HilbertLayout};

type M = ComplexMatrix<f64>;

/// How the per-collision no-jump probability is indexed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepReading {
    /// By steps elapsed since the last jump (renewal weights).
    #[default]
    Age,
    /// By absolute collision index, `p_ℓ = p_step(ℓ − 1)` for every history.
    Absolute,
}

/// Parameters of the generalised collision model.
#[derive(Clone, Debug)]
pub struct CmConfig {
    /// Hamiltonian on S ⊗ M.
    pub h_sm: M,
    /// Collision unitary on S ⊗ n₁.
    pub v: M,
    /// Initial system state.
    pub rho0: DensityMatrix<f64>,
    /// Initial memory state.
    pub eta_bar: DensityMatrix<f64>,
    /// Memory-sized subancilla state.
    pub eta: DensityMatrix<f64>,
    /// System-sized subancilla state.
    pub xi: DensityMatrix<f64>,
    pub hazard: HazardSpec,
    pub tau: f64,
    pub n_steps: usize,
}

impl CmConfig {
    pub fn d_s(&self) -> usize {
        self.rho0.dim()
    }

    pub fn d_m(&self) -> usize {
        self.eta_bar.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let (d_s, d_m) = (self.d_s(), self.d_m());
        if self.h_sm.rows() != d_s * d_m || !self.h_sm.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "H_SM is {}x{}, expected {}",
                self.h_sm.rows(),
                self.h_sm.cols(),
                d_s * d_m
            )));
        }
        let herm = self.h_sm.hermiticity_deviation();
        if herm > 1e-12 * self.h_sm.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation: herm });
        }
        if self.v.rows() != d_s * d_s || !self.v.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "V is {}x{}, expected {}",
                self.v.rows(),
                self.v.cols(),
                d_s * d_s
            )));
        }
        let unit = self.v.unitarity_deviation();
        if unit > 1e-10 {
            return Err(Error::NotUnitary { deviation: unit });
        }
        if self.xi.dim() != d_s {
            return Err(Error::DimensionMismatch("ξ must have the dimension of S".into()));
        }
        if self.eta.dim() != d_m {
            return Err(Error::DimensionMismatch("η must have the dimension of M".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step {} must be positive", self.tau)));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter("at least one step is required".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> HilbertLayout {
        HilbertLayout::new(vec![self.d_s(), self.d_m()], vec!["S", "M"]).expect("two distinct labels")
    }

    /// `ρ₀ ⊗ η̄`.
    pub fn initial_state(&self) -> M {
        self.rho0.matrix().kron(self.eta_bar.matrix())
    }

    /// `e^{−i H_SM τ}`.
    pub fn step_unitary(&self) -> Result<M> {
        unitary_propagator(&self.h_sm, self.tau)
    }

    /// The jump map 𝒵 on S.
    pub fn jump_map(&self) -> Result<QuantumChannel<f64>> {
        jump_map_z(&self.v, &self.xi)
    }

    /// The bipartite jump `ρ_SM ↦ 𝒵[Tr_M ρ_SM] ⊗ η`.
    pub fn bipartite_jump(&self) -> Result<QuantumChannel<f64>> {
        ztilde_reduced(&self.jump_map()?, &self.eta)
    }

    /// No-jump probabilities for every age the run can reach.
    pub fn schedule(&self) -> Result<StepSchedule> {
        self.hazard.schedule(self.tau, self.n_steps.max(1))
    }

    /// Reduces an S⊗M operator to S.
    pub fn reduce(&self, sm: &M) -> Result<M> {
        partial_trace(sm, &self.layout(), &["S"])
    }

    /// Same configuration with a different step size and count.
    pub fn with_steps(&self, tau: f64, n_steps: usize) -> Self {
        Self {
            tau,
            n_steps,
            ..self.clone()
        }
    }
}

/// Per-step S⊗M states, index `n` = state after step `n` (index 0 is the
/// initial state).
#[derive(Clone, Debug)]
pub struct StateSeries {
    pub tau: f64,
    pub layout: HilbertLayout,
    pub states: Vec<M>,
}

impl StateSeries {
    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|n| n as f64 * self.tau).collect()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Reduced states of the factor `label`.
    pub fn reduced(&self, label: &str) -> Result<Vec<M>> {
        self.states
            .iter()
            .map(|s| partial_trace(s, &self.layout, &[label]))
            .collect()
    }
}

/// `U m U†` for the small S⊗M matrices used by every engine.
pub(crate) fn conjugate(m: &M, u: &M, u_dag: &M) -> M {
    u.matmul(m).matmul(u_dag)
}
