use num_complex::Complex;

use super::{CmConfig, StateSeries, StepReading};
use crate::channels::swap_operator;
use crate::error::{Error, Result};
use crate::tensor::{conjugate_local, partial_trace, ComplexMatrix, HilbertLayout, DIMENSION_CAP};

type M = ComplexMatrix<f64>;

/// Largest number of explicitly stored bipartite ancillas.
pub const FULL_CHAIN_MAX_ANCILLAS: usize = 3;

/// Brute-force reference: stores `S ⊗ M ⊗ (n₁ n₂)^k` jointly, applies the
/// four-party collisions on the full space and traces the ancillas only at
/// readout. Runs `config.n_steps ≤ k + 1` steps.
///
/// With the age reading every jump history is kept as its own weighted
/// branch; with the absolute reading the collision maps act linearly.
pub fn run_full_chain_oracle(config: &CmConfig, k: usize, reading: StepReading) -> Result<StateSeries> {
    config.validate()?;
    if k > FULL_CHAIN_MAX_ANCILLAS {
        return Err(Error::InvalidParameter(format!(
            "at most {FULL_CHAIN_MAX_ANCILLAS} explicit ancillas, got {k}"
        )));
    }
    if config.n_steps > k + 1 {
        return Err(Error::InvalidParameter(format!(
            "{} steps need {} ancillas, only {k} stored",
            config.n_steps,
            config.n_steps - 1
        )));
    }
    let (d_s, d_m) = (config.d_s(), config.d_m());
    let dim = d_s * d_m * (d_s * d_m).pow(k as u32);
    if dim > DIMENSION_CAP {
        return Err(Error::DimensionCap { dim, cap: DIMENSION_CAP });
    }
    let mut dims = vec![d_s, d_m];
    let mut labels = vec!["S".to_string(), "M".to_string()];
    for l in 1..=k {
        dims.extend([d_s, d_m]);
        labels.push(format!("n1_{l}"));
        labels.push(format!("n2_{l}"));
    }
    let layout = HilbertLayout::new(dims, labels)?;

    let mut sigma = config.initial_state();
    for _ in 0..k {
        sigma = sigma.kron(&config.xi.matrix().kron(config.eta.matrix()));
    }
    let u = config.step_unitary()?;
    let swap = swap_operator::<f64>(d_m);
    let schedule = config.schedule()?;

    let evolve = |m: &M| conjugate_local(m, &u, &layout, &["S", "M"]);
    let collide = |m: &M, l: usize| -> Result<M> {
        let (a, b) = (format!("n1_{l}"), format!("n2_{l}"));
        let swapped = conjugate_local(m, &swap, &layout, &["M", &b])?;
        conjugate_local(&swapped, &config.v, &layout, &["S", &a])
    };
    let readout = |branches: &[(usize, f64, M)]| -> Result<M> {
        let mut acc = M::zeros(d_s * d_m, d_s * d_m);
        for (_, w, s) in branches {
            acc.add_scaled(Complex::new(*w, 0.0), &partial_trace(s, &layout, &["S", "M"])?);
        }
        Ok(acc)
    };

    // (collision index of the last jump, weight, joint state)
    let mut branches = vec![(0usize, 1.0f64, sigma)];
    let mut states = vec![readout(&branches)?];
    for step in 1..=config.n_steps {
        if step >= 2 {
            let l = step - 1;
            let mut next = Vec::with_capacity(2 * branches.len());
            match reading {
                StepReading::Age => {
                    for (last, w, s) in branches {
                        let p = schedule.p(l - last - 1);
                        next.push((l, w * (1.0 - p), collide(&s, l)?));
                        next.push((last, w * p, s));
                    }
                }
                StepReading::Absolute => {
                    let p = schedule.p(l - 1);
                    for (last, w, s) in branches {
                        let mut mixed = collide(&s, l)?.scale_real(1.0 - p);
                        mixed += &s.scale_real(p);
                        next.push((last, w, mixed));
                    }
                }
            }
            branches = next;
        }
        for b in &mut branches {
            b.2 = evolve(&b.2)?;
        }
        states.push(readout(&branches)?);
    }
    Ok(StateSeries {
        tau: config.tau,
        layout: HilbertLayout::new(vec![d_s, d_m], vec!["S", "M"])?,
        states,
    })
}
