//! Residual of the memory-kernel master equation
//! `dρ/dt = ∫₀ᵗ 𝒲(t−s)[ρ(s)] ds + ℐ(t)[ρ₀]`, with
//! `𝒲(t) = d/dt[f(t)ℰ_t]𝒵 + δ(t) f(0)𝒵` and `ℐ(t) = d/dt[g(t)ℰ̄_t]`.

use num_complex::Complex;
use serde::Serialize;

use super::piecewise::{GridTables, PiecewiseSpec, VolterraResult};
use crate::error::{Error, Result};
use crate::tensor::{trace_norm, ComplexMatrix, DensityMatrix};

type M = ComplexMatrix<f64>;
type C = Complex<f64>;

#[derive(Clone, Debug, Serialize)]
pub struct KernelResidual {
    /// Interior grid times `t_1 … t_{n−1}`.
    pub times: Vec<f64>,
    /// Trace norm of the residual at each interior time.
    pub residuals: Vec<f64>,
    pub max: f64,
}

/// Checks a Volterra solution against the memory-kernel equation on its own
/// grid. Derivatives are central differences (second-order one-sided at the
/// ends of the kernel table), the convolution is a trapezoid sum and the
/// delta part of the kernel contributes `f(0)𝒵ρ(t)` in closed form.
pub fn memory_kernel_residual(
    spec: &PiecewiseSpec,
    rho0: &DensityMatrix<f64>,
    trajectory: &VolterraResult,
) -> Result<KernelResidual> {
    let n = spec.n_grid;
    let h = spec.step();
    if trajectory.raw_states.len() != n + 1
        || (trajectory.propagator.h - h).abs() > 1e-12 * h.max(1.0)
        || trajectory.raw_states.first().map(M::rows) != Some(rho0.dim())
    {
        return Err(Error::DimensionMismatch(format!(
            "trajectory with {} points (step {}) does not match a grid of {} intervals (step {h})",
            trajectory.raw_states.len(),
            trajectory.propagator.h,
            n
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("residual needs at least two grid intervals".into()));
    }
    let tables = GridTables::new(spec, rho0.matrix())?;
    let d = rho0.dim();
    let rho = &trajectory.raw_states;

    // d/dt [f(t) ℰ_t] on the grid, then composed with 𝒵.
    let weighted: Vec<M> = (0..=n).map(|k| tables.after[k].scale_real(tables.f[k])).collect();
    let deriv = |k: usize| -> M {
        let (a, b, c) = if k == 0 {
            (&weighted[0], &weighted[1], &weighted[2])
        } else if k == n {
            (&weighted[n], &weighted[n - 1], &weighted[n - 2])
        } else {
            let mut m = &weighted[k + 1] - &weighted[k - 1];
            m = m.scale_real(0.5 / h);
            return m;
        };
        // ±(3a − 4b + c)/(2h)
        let sign = if k == 0 { -1.0 } else { 1.0 };
        let mut m = a.scale_real(3.0);
        m.add_scaled(Complex::new(-4.0, 0.0), b);
        m += c;
        m.scale_real(sign * 0.5 / h)
    };
    let kernel: Vec<M> = (0..=n).map(|k| deriv(k).matmul(&tables.jump)).collect();
    let f0 = tables.f[0];

    let rho_vec: Vec<&[C]> = rho.iter().map(|m| m.as_slice()).collect();
    let mut times = Vec::with_capacity(n - 1);
    let mut residuals = Vec::with_capacity(n - 1);
    for k in 1..n {
        let mut r: Vec<C> = rho_vec[k + 1]
            .iter()
            .zip(rho_vec[k - 1])
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        for m in 0..=k {
            let w = if m == 0 || m == k { 0.5 * h } else { h };
            for (a, b) in r.iter_mut().zip(kernel[k - m].matvec(rho_vec[m])) {
                *a -= b * w;
            }
        }
        for (a, b) in r.iter_mut().zip(tables.jump.matvec(rho_vec[k])) {
            *a -= b * f0;
        }
        for (i, a) in r.iter_mut().enumerate() {
            let inhom = (tables.before_rho[k + 1][i] * tables.g[k + 1] - tables.before_rho[k - 1][i] * tables.g[k - 1])
                / (2.0 * h);
            *a -= inhom;
        }
        let res = M::from_vec(d, d, r)?;
        times.push(k as f64 * h);
        residuals.push(trace_norm(&res.hermitian_part())?);
    }
    let max = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(KernelResidual { times, residuals, max })
}
