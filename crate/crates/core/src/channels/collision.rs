//! The specific maps of the memory collision model.

use num_complex::Complex;
use num_traits::One;

use super::QuantumChannel;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{embed, partial_trace, unitary_propagator, ComplexMatrix, DensityMatrix, HilbertLayout};

/// `Σ_{μν} |μ⟩⟨ν| ⊗ |ν⟩⟨μ|` on `C^d ⊗ C^d`.
pub fn swap_operator<T: Real>(d: usize) -> ComplexMatrix<T> {
    let mut s = ComplexMatrix::zeros(d * d, d * d);
    for mu in 0..d {
        for nu in 0..d {
            s[(mu * d + nu, nu * d + mu)] = Complex::one();
        }
    }
    s
}

fn check_probability<T: Real>(p: T) -> Result<()> {
    if p >= T::zero() && p <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p.to_f64_lossy()))
    }
}

fn check_unitary<T: Real>(v: &ComplexMatrix<T>) -> Result<()> {
    let dev = v.unitarity_deviation();
    if dev <= T::spectral_tol() {
        Ok(())
    } else {
        Err(Error::NotUnitary {
            deviation: dev.to_f64_lossy(),
        })
    }
}

/// System dimension implied by a unitary on `S ⊗ n₁` with `dim n₁ = dim S`.
fn system_dim<T: Real>(v: &ComplexMatrix<T>) -> Result<usize> {
    let n = v.rows();
    let d = (n as f64).sqrt().round() as usize;
    if !v.is_square() || d * d != n || d == 0 {
        return Err(Error::DimensionMismatch(format!(
            "V must act on S ⊗ n1 with equal dimensions, got {}x{}",
            v.rows(),
            v.cols()
        )));
    }
    Ok(d)
}

/// `p·σ + (1−p)·Ŝσ Ŝ` on memory ⊗ ancilla.
pub fn collision_sec3<T: Real>(p: T, d_m: usize) -> Result<QuantumChannel<T>> {
    check_probability(p)?;
    let swap = QuantumChannel::unitary(&swap_operator(d_m))?;
    Ok(QuantumChannel::mix(p, &QuantumChannel::identity(d_m * d_m), &swap)?.with_label("partial swap"))
}

fn four_party_layout(d_s: usize, d_m: usize) -> Result<HilbertLayout> {
    HilbertLayout::new(vec![d_s, d_m, d_s, d_m], vec!["S", "M", "n1", "n2"])
}

/// `V_{S n₁} Ŝ_{M n₂}` on `S ⊗ M ⊗ n₁ ⊗ n₂`.
pub fn collision_unitary<T: Real>(v: &ComplexMatrix<T>, d_m: usize) -> Result<ComplexMatrix<T>> {
    collision_unitary_with_swap(v, &swap_operator(d_m), d_m)
}

/// As [`collision_unitary`] with a caller-supplied M–n₂ exchange operator.
pub fn collision_unitary_with_swap<T: Real>(
    v: &ComplexMatrix<T>,
    swap: &ComplexMatrix<T>,
    d_m: usize,
) -> Result<ComplexMatrix<T>> {
    let d_s = system_dim(v)?;
    let layout = four_party_layout(d_s, d_m)?;
    let v_full = embed(v, &layout, &["S", "n1"])?;
    let s_full = embed(swap, &layout, &["M", "n2"])?;
    Ok(v_full.matmul(&s_full))
}

/// Four-party collision `p·σ + (1−p)·W σ W†` with `W = V_{S n₁} Ŝ_{M n₂}`.
pub fn collision_sec4<T: Real>(p: T, v: &ComplexMatrix<T>, d_m: usize) -> Result<QuantumChannel<T>> {
    check_probability(p)?;
    check_unitary(v)?;
    let w = collision_unitary(v, d_m)?;
    let n = w.rows();
    let jump = QuantumChannel::unitary(&w)?;
    Ok(QuantumChannel::mix(p, &QuantumChannel::identity(n), &jump)?.with_label("four-party collision"))
}

/// `𝒵[ρ] = Tr_{n₁}{V (ρ ⊗ ξ) V†}`.
pub fn jump_map_z<T: Real>(v: &ComplexMatrix<T>, xi: &DensityMatrix<T>) -> Result<QuantumChannel<T>> {
    check_unitary(v)?;
    let d = system_dim(v)?;
    if xi.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "ancilla state of dimension {} for a system of dimension {d}",
            xi.dim()
        )));
    }
    let layout = HilbertLayout::new(vec![d, d], vec!["S", "n1"])?;
    let ch = QuantumChannel::from_linear_map(d, d, |rho| {
        let joint = rho.kron(xi.matrix()).conjugate_by(v);
        partial_trace(&joint, &layout, &["S"])
    })?;
    Ok(ch.with_label("jump"))
}

/// `ρ_SM ↦ Tr_{n₁n₂}{W (ρ_SM ⊗ ξ ⊗ η) W†}` by dense four-party computation.
pub fn ztilde_full<T: Real>(
    v: &ComplexMatrix<T>,
    xi: &DensityMatrix<T>,
    eta: &DensityMatrix<T>,
) -> Result<QuantumChannel<T>> {
    ztilde_full_with_swap(v, xi, eta, &swap_operator(eta.dim()))
}

/// As [`ztilde_full`] with a caller-supplied M–n₂ exchange operator.
pub fn ztilde_full_with_swap<T: Real>(
    v: &ComplexMatrix<T>,
    xi: &DensityMatrix<T>,
    eta: &DensityMatrix<T>,
    swap: &ComplexMatrix<T>,
) -> Result<QuantumChannel<T>> {
    let d_m = eta.dim();
    let d_s = system_dim(v)?;
    if xi.dim() != d_s {
        return Err(Error::DimensionMismatch("ξ must match the system dimension".into()));
    }
    let w = collision_unitary_with_swap(v, swap, d_m)?;
    let layout = four_party_layout(d_s, d_m)?;
    let ancilla = xi.matrix().kron(eta.matrix());
    let ch = QuantumChannel::from_linear_map(d_s * d_m, d_s * d_m, |rho| {
        let joint = rho.kron(&ancilla).conjugate_by(&w);
        partial_trace(&joint, &layout, &["S", "M"])
    })?;
    Ok(ch.with_label("bipartite jump (dilated)"))
}

/// `ρ_SM ↦ 𝒵[Tr_M ρ_SM] ⊗ η`.
pub fn ztilde_reduced<T: Real>(z: &QuantumChannel<T>, eta: &DensityMatrix<T>) -> Result<QuantumChannel<T>> {
    let d_s = z.input_dim();
    let d_m = eta.dim();
    if z.output_dim() != d_s {
        return Err(Error::DimensionMismatch("jump map must act on S".into()));
    }
    let layout = HilbertLayout::new(vec![d_s, d_m], vec!["S", "M"])?;
    let ch = QuantumChannel::from_linear_map(d_s * d_m, d_s * d_m, |rho| {
        let reduced = partial_trace(rho, &layout, &["S"])?;
        Ok(z.apply_operator(&reduced)?.kron(eta.matrix()))
    })?;
    Ok(ch.with_label("bipartite jump"))
}

/// Reduced effect of one collision on S⊗M: `p·id + (1−p)·𝒵̃`.
pub fn reduced_collision<T: Real>(
    p: T,
    z: &QuantumChannel<T>,
    eta: &DensityMatrix<T>,
) -> Result<QuantumChannel<T>> {
    check_probability(p)?;
    let zt = ztilde_reduced(z, eta)?;
    QuantumChannel::mix(p, &QuantumChannel::identity(zt.input_dim()), &zt)
}

/// `ρ ↦ Tr_M{e^{−iHt} (ρ ⊗ env) e^{iHt}}` on S.
pub fn evolution_map<T: Real>(h_sm: &ComplexMatrix<T>, env: &DensityMatrix<T>, t: T) -> Result<QuantumChannel<T>> {
    let dev = h_sm.hermiticity_deviation();
    if !(dev <= T::structural_tol() * T::one().max(h_sm.max_abs())) {
        return Err(Error::NotHermitian {
            deviation: dev.to_f64_lossy(),
        });
    }
    if t < T::zero() {
        return Err(Error::InvalidParameter(format!("evolution time {t} is negative")));
    }
    let d_m = env.dim();
    let n = h_sm.rows();
    if !n.is_multiple_of(d_m) {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian of dimension {n} is not divisible by memory dimension {d_m}"
        )));
    }
    let d_s = n / d_m;
    let u = unitary_propagator(h_sm, t)?;
    let layout = HilbertLayout::new(vec![d_s, d_m], vec!["S", "M"])?;
    QuantumChannel::from_linear_map(d_s, d_s, |rho| {
        partial_trace(&rho.kron(env.matrix()).conjugate_by(&u), &layout, &["S"])
    })
}
