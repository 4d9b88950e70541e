//! Hermitian eigensolver: unitary Householder reduction to a real symmetric
//! tridiagonal matrix followed by the implicit-shift QL iteration.

use num_complex::Complex;
use num_traits::{One, Zero};

use super::ComplexMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_QL_ITERATIONS: usize = 60;

/// Eigen-decomposition `A = V diag(values) V†` with ascending eigenvalues;
/// column `k` of `vectors` belongs to `values[k]`.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T> {
    pub values: Vec<T>,
    pub vectors: ComplexMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    /// Rebuilds `V diag(f(λ)) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(T) -> Complex<T>) -> ComplexMatrix<T> {
        let n = self.values.len();
        let fv: Vec<Complex<T>> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        ComplexMatrix::from_fn(n, n, |i, j| {
            let mut acc = Complex::zero();
            for k in 0..n {
                acc += v[(i, k)] * fv[k] * v[(j, k)].conj();
            }
            acc
        })
    }
}

/// Full eigen-decomposition of the Hermitian part of `m`.
pub fn eigh<T: Real>(m: &ComplexMatrix<T>) -> Result<HermitianEigen<T>> {
    let (values, vectors) = decompose(m, true)?;
    Ok(HermitianEigen {
        values,
        vectors: vectors.expect("vectors requested"),
    })
}

/// Ascending eigenvalues of the Hermitian part of `m`.
pub fn eigvalsh<T: Real>(m: &ComplexMatrix<T>) -> Result<Vec<T>> {
    Ok(decompose(m, false)?.0)
}

fn decompose<T: Real>(
    m: &ComplexMatrix<T>,
    want_vectors: bool,
) -> Result<(Vec<T>, Option<ComplexMatrix<T>>)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigensolver needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = m.rows();
    let (mut d, mut e, basis) = tridiagonalize(&m.hermitian_part(), want_vectors);
    let mut z = if want_vectors {
        let mut z = vec![T::zero(); n * n];
        for i in 0..n {
            z[i * n + i] = T::one();
        }
        Some(z)
    } else {
        None
    };
    ql_implicit(&mut d, &mut e, z.as_deref_mut(), n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| d[k]).collect();

    let vectors = match (basis, z) {
        (Some(q), Some(z)) => Some(ComplexMatrix::from_fn(n, n, |i, col| {
            let k = order[col];
            let mut acc = Complex::zero();
            for r in 0..n {
                acc += q[(i, r)] * z[r * n + k];
            }
            acc
        })),
        _ => None,
    };
    Ok((values, vectors))
}

/// Reduces a Hermitian matrix to real symmetric tridiagonal form.
///
/// Returns the diagonal, the sub-diagonal (`e[i]` couples `i` and `i+1`,
/// `e[n-1] = 0`) and optionally the unitary `W` with `A = W T W†`.
#[allow(clippy::type_complexity)]
fn tridiagonalize<T: Real>(
    m: &ComplexMatrix<T>,
    want_basis: bool,
) -> (Vec<T>, Vec<T>, Option<ComplexMatrix<T>>) {
    let n = m.rows();
    let mut a: Vec<Complex<T>> = m.as_slice().to_vec();
    let mut q = want_basis.then(|| ComplexMatrix::<T>::identity(n));
    let two = T::lit(2.0);

    let mut v = vec![Complex::<T>::zero(); n];
    let mut w = vec![Complex::<T>::zero(); n];
    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let tail: T = (lo + 1..n).map(|i| a[i * n + k].norm_sqr()).sum();
        if tail == T::zero() {
            continue;
        }
        let x0 = a[lo * n + k];
        let norm = (tail + x0.norm_sqr()).sqrt();
        let phase = if x0.norm() > T::zero() {
            x0 / x0.norm()
        } else {
            Complex::one()
        };
        let alpha = -phase * norm;
        for i in 0..n {
            v[i] = if i < lo { Complex::zero() } else { a[i * n + k] };
        }
        v[lo] -= alpha;
        let vnorm = v[lo..].iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        for vi in v[lo..].iter_mut() {
            *vi = *vi / vnorm;
        }

        // A <- H A H with H = I - 2 v v†:  A' = A - 2 (v w† + w v†),
        // w = A v - (v† A v) v. Rows and columns below k are untouched.
        for i in k..n {
            let mut acc = Complex::zero();
            for j in lo..n {
                acc += a[i * n + j] * v[j];
            }
            w[i] = acc;
        }
        let kappa: Complex<T> = (lo..n).fold(Complex::zero(), |s, i| s + v[i].conj() * w[i]);
        for i in lo..n {
            w[i] -= v[i] * kappa.re;
        }
        for i in k..n {
            for j in k..n {
                let upd = v[i] * w[j].conj() + w[i] * v[j].conj();
                a[i * n + j] -= upd * two;
            }
        }
        if let Some(q) = q.as_mut() {
            // Q <- Q H
            for i in 0..n {
                let mut acc = Complex::<T>::zero();
                for j in lo..n {
                    acc += q[(i, j)] * v[j];
                }
                for j in lo..n {
                    let upd = acc * v[j].conj() * two;
                    q[(i, j)] -= upd;
                }
            }
        }
    }

    let d: Vec<T> = (0..n).map(|i| a[i * n + i].re).collect();
    let mut e = vec![T::zero(); n];
    // Diagonal phase similarity makes the sub-diagonal real and nonnegative.
    let mut phases = vec![Complex::<T>::one(); n];
    for i in 0..n.saturating_sub(1) {
        let sub = a[(i + 1) * n + i];
        let mag = sub.norm();
        e[i] = mag;
        phases[i + 1] = if mag > T::zero() {
            phases[i] * (sub / mag)
        } else {
            phases[i]
        };
    }
    if let Some(q) = q.as_mut() {
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] = q[(i, j)] * phases[j];
            }
        }
    }
    (d, e, q)
}

fn sign<T: Real>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Implicit-shift QL on a symmetric tridiagonal matrix. `z`, when present, is an
/// `n×n` row-major matrix whose columns accumulate the rotations.
fn ql_implicit<T: Real>(d: &mut [T], e: &mut [T], mut z: Option<&mut [T]>, n: usize) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    let two = T::lit(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(Error::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + sign(r, g));
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let f = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * f;
                        z[k * n + i] = c * z[k * n + i] - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix<f64> {
        let a = ComplexMatrix::from_fn(n, n, |_, _| {
            Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        a.hermitian_part()
    }

    #[test]
    fn decomposition_reconstructs_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &n in &[1usize, 2, 3, 5, 8, 17, 40] {
            let a = random_hermitian(n, &mut rng);
            let eig = eigh(&a).unwrap();
            let rebuilt = eig.reconstruct_with(|l| Complex::new(l, 0.0));
            assert!(rebuilt.distance(&a) < 1e-12 * n as f64, "n={n}");
            let vv = eig.vectors.adjoint().matmul(&eig.vectors);
            assert!(vv.distance(&ComplexMatrix::identity(n)) < 1e-12 * n as f64);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn degenerate_spectrum() {
        let a = ComplexMatrix::<f64>::identity(6).scale_real(2.5);
        let eig = eigh(&a).unwrap();
        assert!(eig.values.iter().all(|&l| (l - 2.5).abs() < 1e-14));
        // Rank-one projector: eigenvalues {0,...,0,1}.
        let psi: Vec<Complex<f64>> = (0..4).map(|i| Complex::new(0.5, 0.1 * i as f64)).collect();
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<_> = psi.iter().map(|z| z / norm).collect();
        let vals = eigvalsh(&ComplexMatrix::outer(&psi, &psi)).unwrap();
        assert!((vals[3] - 1.0).abs() < 1e-14);
        assert!(vals[..3].iter().all(|l| l.abs() < 1e-14));
    }

    #[test]
    fn values_only_match_full_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_hermitian(12, &mut rng);
        let full = eigh(&a).unwrap().values;
        let vals = eigvalsh(&a).unwrap();
        for (x, y) in full.iter().zip(&vals) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
