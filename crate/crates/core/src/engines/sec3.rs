use super::{conjugate, CmConfig, StateSeries};
use crate::channels::{ztilde_reduced, QuantumChannel};
use crate::error::{Error, Result};

/// Options for the constant-probability memory model.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sec3Options {
    /// Apply the configured jump map 𝒵 at each collision instead of the bare
    /// memory reset.
    pub insert_jump_map: bool,
}

/// Memory collision model with a step-independent probability `p = e^{−Γτ}`:
/// each collision maps `ρ_SM ↦ p·ρ_SM + (1−p)·Tr_M{ρ_SM} ⊗ η`.
pub fn run_memory_cm_sec3(config: &CmConfig, options: Sec3Options) -> Result<StateSeries> {
    config.validate()?;
    let gamma = config.hazard.constant_rate().ok_or(Error::NonConstantHazard)?;
    let p = (-gamma * config.tau).exp();
    let z = if options.insert_jump_map {
        config.jump_map()?
    } else {
        QuantumChannel::identity(config.d_s())
    };
    let reset = ztilde_reduced(&z, &config.eta)?;
    let u = config.step_unitary()?;
    let u_dag = u.adjoint();

    let mut states = Vec::with_capacity(config.n_steps + 1);
    let mut rho = config.initial_state();
    states.push(rho.clone());
    for step in 1..=config.n_steps {
        if step >= 2 {
            let jumped = reset.apply_operator(&rho)?;
            rho = rho.scale_real(p) + jumped.scale_real(1.0 - p);
        }
        rho = conjugate(&rho, &u, &u_dag);
        states.push(rho.clone());
    }
    Ok(StateSeries {
        tau: config.tau,
        layout: config.layout(),
        states,
    })
}
