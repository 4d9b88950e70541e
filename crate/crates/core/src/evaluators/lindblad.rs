use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channels::QuantumChannel;
use crate::error::{Error, Result};
use crate::tensor::{matrix_exp, ComplexMatrix, DensityMatrix};

type M = ComplexMatrix<f64>;

/// One dissipative channel of a Lindblad generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpOperator {
    pub rate: f64,
    pub op: M,
}

/// Hamiltonian plus jump operators with nonnegative rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladSpec {
    pub h: M,
    pub jumps: Vec<JumpOperator>,
}

/// Row-major superoperator of `ρ ↦ A ρ B`.
pub(crate) fn sandwich(a: &M, b: &M) -> M {
    a.kron(&b.transpose())
}

impl LindbladSpec {
    pub fn new(h: M, jumps: Vec<JumpOperator>) -> Result<Self> {
        let spec = Self { h, jumps };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.h.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.h.rows();
        if !self.h.is_square() {
            return Err(Error::DimensionMismatch("Hamiltonian must be square".into()));
        }
        let dev = self.h.hermiticity_deviation();
        if dev > 1e-12 * self.h.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        for j in &self.jumps {
            if !(j.rate >= 0.0 && j.rate.is_finite()) {
                return Err(Error::InvalidParameter(format!("rate {} must be nonnegative", j.rate)));
            }
            if j.op.rows() != d || j.op.cols() != d {
                return Err(Error::DimensionMismatch("jump operator size".into()));
            }
        }
        Ok(())
    }

    /// `R = −iH − ½ Σ γ L†L`.
    pub fn no_jump_generator(&self) -> M {
        let mut r = self.h.scale(Complex::new(0.0, -1.0));
        for j in &self.jumps {
            r.add_scaled(Complex::new(-0.5 * j.rate, 0.0), &j.op.adjoint().matmul(&j.op));
        }
        r
    }

    /// Superoperator of `𝒥[ρ] = Σ γ L ρ L†`.
    pub fn jump_superop(&self) -> M {
        let d = self.dim();
        let mut s = M::zeros(d * d, d * d);
        for j in &self.jumps {
            s.add_scaled(Complex::new(j.rate, 0.0), &sandwich(&j.op, &j.op.adjoint()));
        }
        s
    }

    /// The Liouvillian as a `d² × d²` superoperator.
    pub fn liouvillian(&self) -> M {
        let d = self.dim();
        let id = M::identity(d);
        let r = self.no_jump_generator();
        let mut l = sandwich(&r, &id);
        l += &sandwich(&id, &r.adjoint());
        l += &self.jump_superop();
        l
    }

    /// `exp(ℒt)` as a channel.
    pub fn channel(&self, t: f64) -> Result<QuantumChannel<f64>> {
        self.validate()?;
        if t < 0.0 {
            return Err(Error::InvalidParameter(format!("time {t} is negative")));
        }
        let d = self.dim();
        QuantumChannel::from_superop(d, d, matrix_exp(&self.liouvillian(), Complex::new(t, 0.0))?)
    }

    /// `ℛ_t[ρ] = e^{Rt} ρ e^{R†t}` (trace-decreasing).
    pub fn no_jump_channel(&self, t: f64) -> Result<QuantumChannel<f64>> {
        let e = matrix_exp(&self.no_jump_generator(), Complex::new(t, 0.0))?;
        Ok(QuantumChannel::from_kraus(&[e])?.with_label("no-jump evolution"))
    }

    /// `𝒥` as a (trace-non-preserving) map.
    pub fn jump_channel(&self) -> Result<QuantumChannel<f64>> {
        let d = self.dim();
        Ok(QuantumChannel::from_superop(d, d, self.jump_superop())?.with_label("jump"))
    }
}

/// `ρ(t) = exp(ℒt)[ρ₀]`.
pub fn lindblad_evolve(spec: &LindbladSpec, rho0: &DensityMatrix<f64>, t: f64) -> Result<DensityMatrix<f64>> {
    spec.channel(t)?.apply(rho0)
}

/// Truncated jump expansion of the Lindblad solution.
#[derive(Clone, Debug)]
pub struct DysonResult {
    /// `Σ_{j ≤ j_max}` of the j-jump contributions (not renormalised).
    pub state: M,
    /// Trace of each j-jump contribution.
    pub order_traces: Vec<f64>,
}

impl DysonResult {
    pub fn trace(&self) -> f64 {
        self.state.trace().re
    }
}

/// Sums the first `j_max + 1` terms of the jump expansion on a uniform grid of
/// `n_grid` intervals, each nested integral by the trapezoid rule:
/// `X₀(s) = ℛ_s[ρ₀]`, `X_j(s) = ∫₀ˢ ℛ_{s−u} 𝒥 X_{j−1}(u) du`.
pub fn dyson_markovian(
    spec: &LindbladSpec,
    rho0: &DensityMatrix<f64>,
    t: f64,
    j_max: usize,
    n_grid: usize,
) -> Result<DysonResult> {
    spec.validate()?;
    if n_grid == 0 || !(t >= 0.0) {
        return Err(Error::InvalidParameter("need t ≥ 0 and a nonempty grid".into()));
    }
    let h = t / n_grid as f64;
    let r = spec.no_jump_generator();
    let props: Vec<M> = (0..=n_grid)
        .map(|k| matrix_exp(&r, Complex::new(k as f64 * h, 0.0)))
        .collect::<Result<_>>()?;
    let props_dag: Vec<M> = props.iter().map(M::adjoint).collect();
    let jump = spec.jump_channel()?;

    let mut x: Vec<M> = (0..=n_grid)
        .map(|k| props[k].matmul(rho0.matrix()).matmul(&props_dag[k]))
        .collect();
    let mut state = x[n_grid].clone();
    let mut order_traces = vec![state.trace().re];
    for _ in 0..j_max {
        let jumped: Vec<M> = x.iter().map(|m| jump.apply_operator(m)).collect::<Result<_>>()?;
        let next: Vec<M> = (0..=n_grid)
            .map(|k| {
                let d = rho0.dim();
                let mut acc = M::zeros(d, d);
                if k == 0 {
                    return acc;
                }
                for m in 0..=k {
                    let w = if m == 0 || m == k { 0.5 * h } else { h };
                    let term = props[k - m].matmul(&jumped[m]).matmul(&props_dag[k - m]);
                    acc.add_scaled(Complex::new(w, 0.0), &term);
                }
                acc
            })
            .collect();
        x = next;
        order_traces.push(x[n_grid].trace().re);
        state += &x[n_grid];
    }
    Ok(DysonResult { state, order_traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use crate::tensor::{eigvalsh, trace_distance_matrices};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn amplitude_damping(gamma: f64) -> LindbladSpec {
        LindbladSpec::new(
            M::zeros(2, 2),
            vec![JumpOperator {
                rate: gamma,
                op: M::unit(2, 0, 1),
            }],
        )
        .unwrap()
    }

    #[test]
    fn no_dissipation_is_unitary() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let h = random::hermitian::<f64, _>(3, 2.0, &mut r);
        let spec = LindbladSpec::new(h.clone(), vec![]).unwrap();
        let rho = random::state::<f64, _>(3, "S", &mut r);
        let u = crate::tensor::unitary_propagator(&h, 0.7).unwrap();
        let out = lindblad_evolve(&spec, &rho, 0.7).unwrap();
        assert!(out.matrix().distance(&rho.matrix().conjugate_by(&u)) < 1e-12);
        let dy = dyson_markovian(&spec, &rho, 0.7, 0, 10).unwrap();
        assert!(dy.state.distance(&rho.matrix().conjugate_by(&u)) < 1e-12);
    }

    #[test]
    fn amplitude_damping_closed_form() {
        let excited = DensityMatrix::<f64>::basis(2, 1, "S").unwrap();
        for gt in [0.5, 1.0, 2.0] {
            let out = lindblad_evolve(&amplitude_damping(1.0), &excited, gt).unwrap();
            assert!((out.matrix()[(1, 1)].re - (-gt).exp()).abs() < 1e-13);
        }
        // Coherence decays at half the rate.
        let plus = DensityMatrix::<f64>::from_bloch([1.0, 0.0, 0.0], "S").unwrap();
        let out = lindblad_evolve(&amplitude_damping(0.8), &plus, 1.5).unwrap();
        assert!((out.matrix()[(0, 1)].re - 0.5 * (-0.4f64 * 1.5).exp()).abs() < 1e-13);
    }

    #[test]
    fn trace_and_positivity_on_a_grid() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let spec = LindbladSpec::new(
            random::hermitian::<f64, _>(2, 1.0, &mut r),
            vec![
                JumpOperator { rate: 0.6, op: random::ginibre(2, 2, &mut r) },
                JumpOperator { rate: 0.2, op: random::ginibre(2, 2, &mut r) },
            ],
        )
        .unwrap();
        let rho = random::state::<f64, _>(2, "S", &mut r);
        for k in 0..100 {
            let out = lindblad_evolve(&spec, &rho, 0.05 * k as f64).unwrap();
            assert!((out.matrix().trace().re - 1.0).abs() < 1e-12);
            assert!(eigvalsh(out.matrix()).unwrap()[0] > -1e-10);
        }
        assert!(spec.channel(2.0).unwrap().verify_cpt(1e-10).unwrap().is_cpt());
    }

    #[test]
    fn dyson_series_converges() {
        let spec = amplitude_damping(1.0);
        let excited = DensityMatrix::<f64>::basis(2, 1, "S").unwrap();
        let exact = lindblad_evolve(&spec, &excited, 1.0).unwrap();
        let zeroth = dyson_markovian(&spec, &excited, 1.0, 0, 400).unwrap();
        let no_jump = spec.no_jump_channel(1.0).unwrap().apply_operator(excited.matrix()).unwrap();
        assert!(zeroth.state.distance(&no_jump) < 1e-14);
        assert!(zeroth.trace() < 1.0);
        let mut last = f64::INFINITY;
        for j in 0..=8 {
            let res = dyson_markovian(&spec, &excited, 1.0, j, 400).unwrap();
            let remainder = 1.0 - res.trace();
            assert!(remainder < last + 1e-12);
            last = remainder;
        }
        let full = dyson_markovian(&spec, &excited, 1.0, 8, 400).unwrap();
        assert!(trace_distance_matrices(&full.state, exact.matrix()).unwrap() < 1e-6);
    }

    #[test]
    fn rejects_negative_rates() {
        let bad = LindbladSpec::new(
            M::zeros(2, 2),
            vec![JumpOperator { rate: -1.0, op: M::unit(2, 0, 1) }],
        );
        assert!(bad.is_err());
    }
}
