//! The jump series `ρ(t) = Σ_j ∫ ℰ_{t−t_j} 𝒵 … 𝒵 ℰ̄_{t₁}[ρ₀] × (weights)`
//! evaluated deterministically (Volterra recursion on a uniform grid) and by
//! Monte Carlo over renewal jump times.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lindblad::{sandwich, LindbladSpec};
use crate::channels::QuantumChannel;
use crate::engines::CmConfig;
use crate::error::{Error, Result};
use crate::renewal::HazardSpec;
use crate::stats::MatrixMoments;
use crate::tensor::{eigh, matrix_exp, partial_trace, ComplexMatrix, DensityMatrix, HilbertLayout};

type M = ComplexMatrix<f64>;
type C = Complex<f64>;

/// Trace deviation above which a readout renormalisation is flagged.
pub const RENORMALIZATION_WARNING: f64 = 1e-3;

/// Which survival/density factor multiplies which end of a jump history.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightOrdering {
    /// `g(t₁) f(t₂−t₁) … f(t−t_j)`: survival before the first jump.
    #[default]
    AsWritten,
    /// `f(t₁) f(t₂−t₁) … g(t−t_j)`: survival after the last jump, as in a
    /// forward renewal process (the weights the collision model produces).
    Renewal,
}

/// A one-parameter family of maps `t ↦ ℰ_t` with `ℰ₀ = id`.
#[derive(Clone, Debug)]
pub enum MapFamily {
    /// `ρ ↦ Tr_M{e^{−iHt}(ρ ⊗ env)e^{iHt}}`.
    Dilated { h_sm: M, env: DensityMatrix<f64> },
    /// `ρ ↦ e^{−iHt} ρ e^{iHt}`.
    Unitary { h: M },
    /// `exp(ℒt)`.
    Lindblad(LindbladSpec),
}

/// A [`MapFamily`] with its generator diagonalised once.
#[derive(Clone, Debug)]
pub struct PreparedFamily {
    kind: Prepared,
    dim: usize,
}

#[derive(Clone, Debug)]
enum Prepared {
    Hamiltonian {
        values: Vec<f64>,
        vectors: M,
        env: Option<(M, HilbertLayout)>,
    },
    Generator(M),
}

impl MapFamily {
    pub fn prepare(&self) -> Result<PreparedFamily> {
        let hermitian = |h: &M| -> Result<()> {
            let dev = h.hermiticity_deviation();
            if !h.is_square() {
                return Err(Error::DimensionMismatch("Hamiltonian must be square".into()));
            }
            if dev > 1e-12 * h.max_abs().max(1.0) {
                return Err(Error::NotHermitian { deviation: dev });
            }
            Ok(())
        };
        match self {
            MapFamily::Dilated { h_sm, env } => {
                hermitian(h_sm)?;
                let d_m = env.dim();
                if h_sm.rows() % d_m != 0 {
                    return Err(Error::DimensionMismatch(format!(
                        "H_SM of dimension {} is not divisible by memory dimension {d_m}",
                        h_sm.rows()
                    )));
                }
                let d_s = h_sm.rows() / d_m;
                let eig = eigh(h_sm)?;
                let layout = HilbertLayout::new(vec![d_s, d_m], vec!["S", "M"])?;
                Ok(PreparedFamily {
                    kind: Prepared::Hamiltonian {
                        values: eig.values,
                        vectors: eig.vectors,
                        env: Some((env.matrix().clone(), layout)),
                    },
                    dim: d_s,
                })
            }
            MapFamily::Unitary { h } => {
                hermitian(h)?;
                let eig = eigh(h)?;
                Ok(PreparedFamily {
                    kind: Prepared::Hamiltonian {
                        values: eig.values,
                        vectors: eig.vectors,
                        env: None,
                    },
                    dim: h.rows(),
                })
            }
            MapFamily::Lindblad(spec) => {
                spec.validate()?;
                Ok(PreparedFamily {
                    kind: Prepared::Generator(spec.liouvillian()),
                    dim: spec.dim(),
                })
            }
        }
    }
}

impl PreparedFamily {
    /// Dimension of the system the maps act on.
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn propagator(values: &[f64], vectors: &M, t: f64) -> M {
        let n = values.len();
        let phases: Vec<C> = values.iter().map(|&l| Complex::new(0.0, -l * t).exp()).collect();
        M::from_fn(n, n, |i, j| {
            let mut acc = Complex::new(0.0, 0.0);
            for k in 0..n {
                acc += vectors[(i, k)] * phases[k] * vectors[(j, k)].conj();
            }
            acc
        })
    }

    /// `ℰ_t[ρ]`.
    pub fn apply(&self, t: f64, rho: &M) -> Result<M> {
        match &self.kind {
            Prepared::Hamiltonian { values, vectors, env } => {
                let u = Self::propagator(values, vectors, t);
                match env {
                    Some((env, layout)) => partial_trace(&rho.kron(env).conjugate_by(&u), layout, &["S"]),
                    None => Ok(rho.conjugate_by(&u)),
                }
            }
            Prepared::Generator(l) => {
                let s = matrix_exp(l, Complex::new(t, 0.0))?;
                M::from_vec(self.dim, self.dim, s.matvec(rho.as_slice()))
            }
        }
    }

    /// Row-major superoperator of `ℰ_t`.
    pub fn superop(&self, t: f64) -> Result<M> {
        match &self.kind {
            Prepared::Hamiltonian { values, vectors, env: None } => {
                let u = Self::propagator(values, vectors, t);
                Ok(sandwich(&u, &u.adjoint()))
            }
            Prepared::Generator(l) => matrix_exp(l, Complex::new(t, 0.0)),
            Prepared::Hamiltonian { .. } => {
                let d = self.dim;
                Ok(QuantumChannel::from_linear_map(d, d, |rho| self.apply(t, rho))?
                    .superop()
                    .clone())
            }
        }
    }
}

/// Everything the series needs: the two evolution families, the jump map,
/// the hazard and a uniform grid `t_k = k·horizon/n_grid`.
#[derive(Clone, Debug)]
pub struct PiecewiseSpec {
    /// Evolution before the first jump (`ℰ̄`).
    pub before: MapFamily,
    /// Evolution after each jump (`ℰ`).
    pub after: MapFamily,
    /// Jump map `𝒵`.
    pub jump: QuantumChannel<f64>,
    pub hazard: HazardSpec,
    pub horizon: f64,
    pub n_grid: usize,
    pub ordering: WeightOrdering,
}

impl PiecewiseSpec {
    /// The continuum description matching a collision-model configuration:
    /// `ℰ̄` dilates with `η̄`, `ℰ` with `η`, `𝒵` is the jump map of `V, ξ`.
    pub fn from_config(config: &CmConfig, horizon: f64, n_grid: usize, ordering: WeightOrdering) -> Result<Self> {
        config.validate()?;
        let spec = Self {
            before: MapFamily::Dilated {
                h_sm: config.h_sm.clone(),
                env: config.eta_bar.clone(),
            },
            after: MapFamily::Dilated {
                h_sm: config.h_sm.clone(),
                env: config.eta.clone(),
            },
            jump: config.jump_map()?,
            hazard: config.hazard.clone(),
            horizon,
            n_grid,
            ordering,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_grid as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.step();
        (0..=self.n_grid).map(|k| k as f64 * h).collect()
    }

    pub fn with_grid(&self, n_grid: usize) -> Self {
        Self {
            n_grid,
            ..self.clone()
        }
    }

    pub fn with_ordering(&self, ordering: WeightOrdering) -> Self {
        Self {
            ordering,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid == 0 || !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid needs a positive horizon and at least one interval (horizon {}, n_grid {})",
                self.horizon, self.n_grid
            )));
        }
        if self.horizon > self.hazard.domain_max() {
            return Err(Error::OutOfDomain {
                t: self.horizon,
                max: self.hazard.domain_max(),
            });
        }
        let (before, after) = (self.before.prepare()?, self.after.prepare()?);
        let d = before.dim();
        if after.dim() != d || self.jump.input_dim() != d || self.jump.output_dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "evolution maps act on {d} and {}, jump map on {}→{}",
                after.dim(),
                self.jump.input_dim(),
                self.jump.output_dim()
            )));
        }
        let report = self.jump.verify_cpt(1e-10)?;
        if !report.is_cpt() {
            return Err(Error::NotTracePreserving(format!(
                "jump map (min Choi eigenvalue {:e}, TP residual {:e})",
                report.min_choi_eig, report.tp_residual
            )));
        }
        let id = M::identity(d * d);
        for fam in [&before, &after] {
            let dev = fam.superop(0.0)?.distance(&id);
            if dev > 1e-10 {
                return Err(Error::InvalidParameter(format!("evolution map at t = 0 is not the identity ({dev:e})")));
            }
        }
        Ok(())
    }

    fn initial(&self, rho0: &DensityMatrix<f64>) -> Result<M> {
        let d = self.jump.input_dim();
        if rho0.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "initial state of dimension {} for maps on {d}",
                rho0.dim()
            )));
        }
        Ok(rho0.matrix().clone())
    }
}

/// Superoperators tabulated at the grid lags `k·h`.
#[derive(Clone, Debug)]
pub struct GridPropagator {
    pub h: f64,
    pub maps: Vec<M>,
}

impl GridPropagator {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

/// Options for [`volterra_piecewise_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VolterraOptions {
    /// Keep only histories with at most this many jumps.
    pub max_jumps: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct VolterraResult {
    pub times: Vec<f64>,
    /// Trapezoid solution before renormalisation.
    pub raw_states: Vec<M>,
    pub raw_traces: Vec<f64>,
    /// Readout states divided by their trace.
    pub states: Vec<M>,
    /// `max_k |Tr ρ_k − 1|`.
    pub max_renormalization: f64,
    /// Set when the renormalisation exceeds [`RENORMALIZATION_WARNING`].
    pub coarse_grid_warning: bool,
    /// The resolvent propagator (`G` or its survival-weighted counterpart).
    pub propagator: GridPropagator,
}

/// `acc += w · x · a` for row-major `n×n` blocks.
fn mul_acc(acc: &mut [C], x: &[C], a: &[C], n: usize, w: f64) {
    for i in 0..n {
        let xi = &x[i * n..(i + 1) * n];
        let row = &mut acc[i * n..(i + 1) * n];
        for (k, &xik) in xi.iter().enumerate() {
            if xik.re == 0.0 && xik.im == 0.0 {
                continue;
            }
            let s = xik * w;
            for (r, &akj) in row.iter_mut().zip(&a[k * n..(k + 1) * n]) {
                *r += s * akj;
            }
        }
    }
}

/// Tabulated ingredients shared by the Volterra solver and the kernel check.
pub(crate) struct GridTables {
    pub h: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// `ℰ_{t_k}` superoperators.
    pub after: Vec<M>,
    /// `ℰ̄_{t_k}[ρ₀]` as vectors.
    pub before_rho: Vec<Vec<C>>,
    pub jump: M,
}

impl GridTables {
    pub fn new(spec: &PiecewiseSpec, rho0: &M) -> Result<Self> {
        spec.validate()?;
        let h = spec.step();
        let times = spec.times();
        let before = spec.before.prepare()?;
        let after = spec.after.prepare()?;
        let f = times.iter().map(|&t| spec.hazard.density(t)).collect::<Result<Vec<_>>>()?;
        let g = times.iter().map(|&t| spec.hazard.survival(t)).collect::<Result<Vec<_>>>()?;
        let after_maps = times
            .par_iter()
            .map(|&t| after.superop(t))
            .collect::<Result<Vec<_>>>()?;
        let before_rho = times
            .par_iter()
            .map(|&t| before.apply(t, rho0).map(M::into_vec))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            h,
            f,
            g,
            after: after_maps,
            before_rho,
            jump: spec.jump.superop().clone(),
        })
    }
}

fn trapezoid_weight(m: usize, k: usize, h: f64) -> f64 {
    if m == 0 || m == k {
        0.5 * h
    } else {
        h
    }
}

/// Evaluates the series on the grid by the first-jump resolvent recursion.
pub fn volterra_piecewise(spec: &PiecewiseSpec, rho0: &DensityMatrix<f64>) -> Result<VolterraResult> {
    volterra_piecewise_with(spec, rho0, VolterraOptions::default())
}

/// [`volterra_piecewise`] with optional truncation of the jump count.
///
/// The resolvent `X` satisfies `X_k = B_k + h Σ' X_{k−m} A_m` with
/// `A_m = f_m 𝒵ℰ_m` and `B_k = f_k ℰ_k` (as written) or `g_k ℰ_k` (renewal);
/// the state is `ρ_k = g_k ℰ̄_k ρ₀ + h Σ' X_{k−m} w_m 𝒵 ℰ̄_m ρ₀` with
/// `w = g` (as written) or `f` (renewal).
///
/// The quadrature is second order for hazards with a smooth density; a
/// `t^b` hazard with `0 < b < 1` limits it to `O(h^{1+b})`.
pub fn volterra_piecewise_with(
    spec: &PiecewiseSpec,
    rho0: &DensityMatrix<f64>,
    options: VolterraOptions,
) -> Result<VolterraResult> {
    let rho0m = spec.initial(rho0)?;
    let tables = GridTables::new(spec, &rho0m)?;
    let n = spec.n_grid;
    let h = tables.h;
    let d = rho0.dim();
    let dd = d * d;
    let renewal = spec.ordering == WeightOrdering::Renewal;

    let kernel: Vec<M> = (0..=n)
        .map(|m| tables.jump.matmul(&tables.after[m]).scale_real(tables.f[m]))
        .collect();
    let base: Vec<M> = (0..=n)
        .map(|k| {
            let w = if renewal { tables.g[k] } else { tables.f[k] };
            tables.after[k].scale_real(w)
        })
        .collect();

    let max_jumps = options.max_jumps;
    let resolvent: Vec<M> = match max_jumps {
        Some(0) => vec![M::zeros(dd, dd); n + 1],
        Some(j) => {
            // Picard iteration: the (i)-th iterate holds histories with at most
            // i extra jumps inside the resolvent.
            let mut x = base.clone();
            for _ in 1..j {
                let next: Vec<M> = (0..=n)
                    .into_par_iter()
                    .map(|k| {
                        let mut acc = base[k].clone();
                        if k > 0 {
                            let slice = acc.as_mut_slice();
                            for m in 0..=k {
                                mul_acc(slice, x[k - m].as_slice(), kernel[m].as_slice(), dd, trapezoid_weight(m, k, h));
                            }
                        }
                        acc
                    })
                    .collect();
                x = next;
            }
            x
        }
        None => {
            let solve = (&M::identity(dd) - &kernel[0].scale_real(0.5 * h)).inverse()?;
            let mut x: Vec<M> = Vec::with_capacity(n + 1);
            x.push(base[0].clone());
            for k in 1..=n {
                let mut acc = base[k].clone();
                let slice = acc.as_mut_slice();
                mul_acc(slice, x[0].as_slice(), kernel[k].as_slice(), dd, 0.5 * h);
                for m in 1..k {
                    mul_acc(slice, x[k - m].as_slice(), kernel[m].as_slice(), dd, h);
                }
                x.push(acc.matmul(&solve));
            }
            x
        }
    };

    let source: Vec<Vec<C>> = (0..=n)
        .map(|m| {
            let w = if renewal { tables.f[m] } else { tables.g[m] };
            tables.jump.matvec(&tables.before_rho[m]).into_iter().map(|z| z * w).collect()
        })
        .collect();

    let mut raw_states = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut v: Vec<C> = tables.before_rho[k].iter().map(|z| z * tables.g[k]).collect();
        if k > 0 && max_jumps != Some(0) {
            for m in 0..=k {
                let w = trapezoid_weight(m, k, h);
                let y = resolvent[k - m].matvec(&source[m]);
                for (a, b) in v.iter_mut().zip(y) {
                    *a += b * w;
                }
            }
        }
        raw_states.push(M::from_vec(d, d, v)?);
    }

    let raw_traces: Vec<f64> = raw_states.iter().map(|m| m.trace().re).collect();
    let mut states = Vec::with_capacity(n + 1);
    for (m, &tr) in raw_states.iter().zip(&raw_traces) {
        if !(tr > 0.0) {
            return Err(Error::InvalidState(format!("grid state has trace {tr}")));
        }
        states.push(m.scale_real(1.0 / tr).hermitian_part());
    }
    let max_renormalization = raw_traces.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max);
    Ok(VolterraResult {
        times: spec.times(),
        raw_states,
        raw_traces,
        states,
        max_renormalization,
        coarse_grid_warning: max_jumps.is_none() && max_renormalization > RENORMALIZATION_WARNING,
        propagator: GridPropagator { h, maps: resolvent },
    })
}

/// Monte Carlo estimate of the series at selected grid points.
#[derive(Clone, Debug)]
pub struct McResult {
    pub grid_indices: Vec<usize>,
    pub times: Vec<f64>,
    pub mean: Vec<M>,
    /// Standard errors of the real and imaginary parts of each entry.
    pub stderr: Vec<M>,
    pub n_trajectories: usize,
    pub seed: u64,
}

const MC_CHUNK: usize = 256;

/// Samples `n_trajectories` renewal jump histories on `[0, horizon]` and
/// averages the resulting piecewise maps at the requested grid indices
/// (all grid points when `grid_indices` is empty).
///
/// One forward renewal sequence is drawn per trajectory; its prefix up to `t`
/// is a renewal sequence on `[0, t]`. Under [`WeightOrdering::AsWritten`] the
/// prefix is time-reversed, which carries the survival factor to the first
/// interval. Trajectory `i` uses ChaCha8 seeded with `seed` on stream `i`.
pub fn mc_piecewise(
    spec: &PiecewiseSpec,
    rho0: &DensityMatrix<f64>,
    n_trajectories: usize,
    seed: u64,
    grid_indices: &[usize],
) -> Result<McResult> {
    spec.validate()?;
    let rho0m = spec.initial(rho0)?;
    if n_trajectories == 0 {
        return Err(Error::InvalidParameter("at least one trajectory is required".into()));
    }
    let indices: Vec<usize> = if grid_indices.is_empty() {
        (0..=spec.n_grid).collect()
    } else {
        grid_indices.to_vec()
    };
    if let Some(&bad) = indices.iter().find(|&&k| k > spec.n_grid) {
        return Err(Error::InvalidParameter(format!("grid index {bad} beyond {}", spec.n_grid)));
    }
    let h = spec.step();
    let times: Vec<f64> = indices.iter().map(|&k| k as f64 * h).collect();
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let before = spec.before.prepare()?;
    let after = spec.after.prepare()?;
    let jump = &spec.jump;
    let d = rho0.dim();
    let renewal = spec.ordering == WeightOrdering::Renewal;

    let evaluate = |jumps: &[f64], t: f64| -> Result<M> {
        let j = jumps.len();
        if j == 0 {
            return before.apply(t, &rho0m);
        }
        // Interval lengths in the order they are applied.
        let mut gaps = Vec::with_capacity(j + 1);
        if renewal {
            gaps.push(jumps[0]);
            for w in jumps.windows(2) {
                gaps.push(w[1] - w[0]);
            }
            gaps.push(t - jumps[j - 1]);
        } else {
            gaps.push(t - jumps[j - 1]);
            for w in jumps.windows(2).rev() {
                gaps.push(w[1] - w[0]);
            }
            gaps.push(jumps[0]);
        }
        let mut rho = before.apply(gaps[0], &rho0m)?;
        for &gap in &gaps[1..] {
            rho = jump.apply_operator(&rho)?;
            rho = after.apply(gap, &rho)?;
        }
        Ok(rho)
    };

    let chunks: Vec<Result<MatrixMoments>> = (0..n_trajectories.div_ceil(MC_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = MatrixMoments::new(indices.len(), d, d);
            for i in c * MC_CHUNK..((c + 1) * MC_CHUNK).min(n_trajectories) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let jumps = spec.hazard.sample_renewal(t_max, &mut rng)?;
                acc.begin_sample();
                for (slot, &t) in times.iter().enumerate() {
                    let prefix = jumps.partition_point(|&s| s <= t);
                    acc.push(slot, &evaluate(&jumps[..prefix], t)?);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = MatrixMoments::new(indices.len(), d, d);
    for c in chunks {
        total.merge(&c?);
    }
    Ok(McResult {
        grid_indices: indices,
        times,
        mean: total.means().to_vec(),
        stderr: total.standard_errors(),
        n_trajectories,
        seed,
    })
}
