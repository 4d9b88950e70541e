//! Matrix exponential.
//!
//! Hermitian and skew-Hermitian exponents go through the eigen-decomposition;
//! everything else (e.g. the non-normal no-jump generator) through
//! scaling-and-squaring with a degree-13 Padé approximant.

use num_complex::Complex;

use super::{eigh, ComplexMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

/// `exp(scale · m)`.
pub fn matrix_exp<T: Real>(m: &ComplexMatrix<T>, scale: Complex<T>) -> Result<ComplexMatrix<T>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "matrix_exp needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let tol = T::structural_tol() * T::one().max(m.max_abs());
    if m.is_hermitian(tol) {
        let eig = eigh(m)?;
        return Ok(eig.reconstruct_with(|l| (scale * l).exp()));
    }
    // m = i K with K Hermitian.
    let k = m.scale(Complex::new(T::zero(), -T::one()));
    if k.is_hermitian(tol) {
        let eig = eigh(&k)?;
        let s = scale * Complex::new(T::zero(), T::one());
        return Ok(eig.reconstruct_with(|l| (s * l).exp()));
    }
    pade_exp(&m.scale(scale))
}

/// `exp(-i h t)` for a Hermitian `h`.
pub fn unitary_propagator<T: Real>(h: &ComplexMatrix<T>, t: T) -> Result<ComplexMatrix<T>> {
    matrix_exp(h, Complex::new(T::zero(), -t))
}

fn pade_exp<T: Real>(a: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let n = a.rows();
    let norm = a.norm_one().to_f64_lossy();
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.scale_real(T::lit(2f64.powi(-squarings)));
    let b: Vec<Complex<T>> = PADE13.iter().map(|&x| Complex::new(T::lit(x), T::zero())).collect();
    let id = ComplexMatrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let mut inner_u = a6.scale(b[13]);
    inner_u.add_scaled(b[11], &a4);
    inner_u.add_scaled(b[9], &a2);
    let mut u = a6.matmul(&inner_u);
    u.add_scaled(b[7], &a6);
    u.add_scaled(b[5], &a4);
    u.add_scaled(b[3], &a2);
    u.add_scaled(b[1], &id);
    let u = a.matmul(&u);

    let mut inner_v = a6.scale(b[12]);
    inner_v.add_scaled(b[10], &a4);
    inner_v.add_scaled(b[8], &a2);
    let mut v = a6.matmul(&inner_v);
    v.add_scaled(b[6], &a6);
    v.add_scaled(b[4], &a4);
    v.add_scaled(b[2], &a2);
    v.add_scaled(b[0], &id);

    let mut x = (&v - &u).solve(&(&v + &u))?;
    for _ in 0..squarings {
        x = x.matmul(&x);
    }
    Ok(x)
}
