//! Random matrices and states for property tests and the verification suite.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::scalar::Real;
use crate::tensor::{ComplexMatrix, DensityMatrix, HilbertLayout};

fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::lit(re), T::lit(im))
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix<T> {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Hermitian matrix with spectral norm at most `bound`.
pub fn hermitian<T: Real, R: Rng + ?Sized>(d: usize, bound: T, rng: &mut R) -> ComplexMatrix<T> {
    let h = ginibre::<T, R>(d, d, rng).hermitian_part();
    let norm = h.frobenius_norm();
    if norm > T::zero() {
        h.scale_real(bound / norm)
    } else {
        h
    }
}

/// Haar-random unitary by Gram–Schmidt on a Ginibre matrix.
pub fn unitary<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix<T> {
    let g = ginibre::<T, R>(d, d, rng);
    let mut cols: Vec<Vec<Complex<T>>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut v = g.column(j);
        // Two passes keep the columns orthonormal to working precision.
        for _ in 0..2 {
            for q in &cols {
                let overlap: Complex<T> = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= qi * overlap;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        cols.push(v.into_iter().map(|z| z / norm).collect());
    }
    ComplexMatrix::from_fn(d, d, |i, j| cols[j][i])
}

/// Random mixed state `A A† / Tr(A A†)` with `A` of shape `d × rank`.
pub fn mixed_state_matrix<T: Real, R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> ComplexMatrix<T> {
    let a = ginibre::<T, R>(d, rank.max(1), rng);
    let rho = a.matmul(&a.adjoint()).hermitian_part();
    let tr = rho.trace().re;
    rho.scale_real(T::one() / tr)
}

/// Full-rank random state on `layout`.
pub fn density<T: Real, R: Rng + ?Sized>(layout: &HilbertLayout, rng: &mut R) -> Result<DensityMatrix<T>> {
    let d = layout.total_dim();
    DensityMatrix::new(mixed_state_matrix(d, d, rng), layout.clone())
}

/// Random single-factor state.
pub fn state<T: Real, R: Rng + ?Sized>(d: usize, label: &str, rng: &mut R) -> DensityMatrix<T> {
    density(&HilbertLayout::single(d, label), rng).expect("random state is valid")
}

/// Random pure state on a single factor.
pub fn pure_state<T: Real, R: Rng + ?Sized>(d: usize, label: &str, rng: &mut R) -> DensityMatrix<T> {
    let psi: Vec<Complex<T>> = (0..d).map(|_| gaussian(rng)).collect();
    DensityMatrix::pure(&psi, label).expect("random pure state is valid")
}

/// Random Kraus family `{K_k}` with `Σ K†K = I`, built from a random isometry.
pub fn kraus_family<T: Real, R: Rng + ?Sized>(d: usize, count: usize, rng: &mut R) -> Vec<ComplexMatrix<T>> {
    let u = unitary::<T, R>(d * count, rng);
    (0..count)
        .map(|k| ComplexMatrix::from_fn(d, d, |i, j| u[(k * d + i, j)]))
        .collect()
}

/// Random collision-model configuration: qubit-sized subancilla for S,
/// Hamiltonian of Frobenius norm `h_norm`, Haar `V`, full-rank states.
pub fn cm_config<R: Rng + ?Sized>(
    d_s: usize,
    d_m: usize,
    h_norm: f64,
    hazard: crate::renewal::HazardSpec,
    tau: f64,
    n_steps: usize,
    rng: &mut R,
) -> crate::engines::CmConfig {
    crate::engines::CmConfig {
        h_sm: hermitian(d_s * d_m, h_norm, rng),
        v: unitary(d_s * d_s, rng),
        rho0: state(d_s, "S", rng),
        eta_bar: state(d_m, "M", rng),
        eta: state(d_m, "M", rng),
        xi: state(d_s, "n1", rng),
        hazard,
        tau,
        n_steps,
    }
}
