//! Linear maps on operators, stored as superoperator matrices.
//!
//! Vectorisation is row-major, `vec(ρ)[i·d + j] = ρ[i, j]`, so conjugation
//! `ρ ↦ KρK†` has superoperator `K ⊗ conj(K)`. The Choi matrix is the
//! unnormalised `Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)` with the input factor first.

mod collision;
mod serde_impl;

use num_complex::Complex;
use num_traits::{One, Zero};

pub use collision::{
    collision_sec3, collision_sec4, collision_unitary, collision_unitary_with_swap,
    evolution_map, jump_map_z, reduced_collision, swap_operator, ztilde_full,
    ztilde_full_with_swap, ztilde_reduced,
};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{eigh, eigvalsh, ComplexMatrix, DensityMatrix, HilbertLayout};

/// A linear map from `d_in × d_in` to `d_out × d_out` operators.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumChannel<T> {
    d_in: usize,
    d_out: usize,
    superop: ComplexMatrix<T>,
    trace_preserving: bool,
    label: Option<String>,
}

/// Complete-positivity and trace-preservation diagnostics.
///
/// `min_choi_eig` is the smallest eigenvalue of the Choi matrix divided by
/// `d_in`; `tp_residual` is `‖Tr_out C − I‖_F`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CptReport {
    pub cp: bool,
    pub tp: bool,
    pub min_choi_eig: f64,
    pub tp_residual: f64,
}

impl CptReport {
    pub fn is_cpt(&self) -> bool {
        self.cp && self.tp
    }
}

impl<T: Real> QuantumChannel<T> {
    /// Wraps a `d_out² × d_in²` superoperator. The trace-preserving flag is
    /// computed from the matrix.
    pub fn from_superop(d_in: usize, d_out: usize, superop: ComplexMatrix<T>) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::DimensionMismatch("channel dimensions must be positive".into()));
        }
        if superop.rows() != d_out * d_out || superop.cols() != d_in * d_in {
            return Err(Error::DimensionMismatch(format!(
                "superoperator of size {}x{} for a {d_in} -> {d_out} channel",
                superop.rows(),
                superop.cols()
            )));
        }
        if !superop.is_finite() {
            return Err(Error::NonFinite);
        }
        let mut ch = Self {
            d_in,
            d_out,
            superop,
            trace_preserving: false,
            label: None,
        };
        ch.trace_preserving = ch.tp_residual() <= T::spectral_tol();
        Ok(ch)
    }

    /// `ρ ↦ Σ_k K_k ρ K_k†`.
    pub fn from_kraus(kraus: &[ComplexMatrix<T>]) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty Kraus family".into()))?;
        let (d_out, d_in) = (first.rows(), first.cols());
        let mut s = ComplexMatrix::zeros(d_out * d_out, d_in * d_in);
        for k in kraus {
            if k.rows() != d_out || k.cols() != d_in {
                return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
            }
            s += &k.kron(&k.conj());
        }
        Self::from_superop(d_in, d_out, s)
    }

    /// Tabulates a linear map by its action on the matrix units `|i⟩⟨j|`.
    pub fn from_linear_map(
        d_in: usize,
        d_out: usize,
        mut f: impl FnMut(&ComplexMatrix<T>) -> Result<ComplexMatrix<T>>,
    ) -> Result<Self> {
        let mut s = ComplexMatrix::zeros(d_out * d_out, d_in * d_in);
        for i in 0..d_in {
            for j in 0..d_in {
                let out = f(&ComplexMatrix::unit(d_in, i, j))?;
                if out.rows() != d_out || out.cols() != d_out {
                    return Err(Error::DimensionMismatch(format!(
                        "linear map produced {}x{}, expected {d_out}x{d_out}",
                        out.rows(),
                        out.cols()
                    )));
                }
                let col = i * d_in + j;
                for (r, &z) in out.as_slice().iter().enumerate() {
                    s[(r, col)] = z;
                }
            }
        }
        Self::from_superop(d_in, d_out, s)
    }

    pub fn identity(d: usize) -> Self {
        Self::from_superop(d, d, ComplexMatrix::identity(d * d))
            .expect("identity superoperator")
            .with_label("identity")
    }

    /// Conjugation by `u`. No unitarity check; see [`Self::unitary_checked`].
    pub fn unitary(u: &ComplexMatrix<T>) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::DimensionMismatch("unitary must be square".into()));
        }
        Self::from_superop(u.rows(), u.rows(), u.kron(&u.conj()))
    }

    pub fn unitary_checked(u: &ComplexMatrix<T>) -> Result<Self> {
        let dev = u.unitarity_deviation();
        if !(dev <= T::spectral_tol()) {
            return Err(Error::NotUnitary {
                deviation: dev.to_f64_lossy(),
            });
        }
        Self::unitary(u)
    }

    /// The transpose map `ρ ↦ ρᵀ` (positive but not completely positive).
    pub fn transpose(d: usize) -> Self {
        Self::from_linear_map(d, d, |m| Ok(m.transpose()))
            .expect("transpose map")
            .with_label("transpose")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn input_dim(&self) -> usize {
        self.d_in
    }

    pub fn output_dim(&self) -> usize {
        self.d_out
    }

    pub fn superop(&self) -> &ComplexMatrix<T> {
        &self.superop
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// Errors unless the channel is trace preserving.
    pub fn require_trace_preserving(&self) -> Result<()> {
        if self.trace_preserving {
            Ok(())
        } else {
            Err(Error::NotTracePreserving(
                self.label.clone().unwrap_or_else(|| "unnamed".into()),
            ))
        }
    }

    /// Applies the map to an arbitrary operator.
    pub fn apply_operator(&self, m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        if m.rows() != self.d_in || m.cols() != self.d_in {
            return Err(Error::DimensionMismatch(format!(
                "operator {}x{} into a channel with input dimension {}",
                m.rows(),
                m.cols(),
                self.d_in
            )));
        }
        let out = self.superop.matvec(m.as_slice());
        ComplexMatrix::from_vec(self.d_out, self.d_out, out)
    }

    /// Applies the channel to a state; the output layout is kept when the
    /// dimension is unchanged.
    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        let out = self.apply_operator(rho.matrix())?;
        let layout = if self.d_out == self.d_in {
            rho.layout().clone()
        } else {
            HilbertLayout::single(self.d_out, "out")
        };
        DensityMatrix::new(out.hermitian_part(), layout)
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        if inner.d_out != self.d_in {
            return Err(Error::DimensionMismatch(format!(
                "composing {} -> {} after {} -> {}",
                self.d_in, self.d_out, inner.d_in, inner.d_out
            )));
        }
        Self::from_superop(inner.d_in, self.d_out, self.superop.matmul(&inner.superop))
    }

    /// `p·a + (1−p)·b`.
    pub fn mix(p: T, a: &Self, b: &Self) -> Result<Self> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::InvalidProbability(p.to_f64_lossy()));
        }
        if a.d_in != b.d_in || a.d_out != b.d_out {
            return Err(Error::DimensionMismatch("mixing channels of different shape".into()));
        }
        let mut s = a.superop.scale_real(p);
        s.add_scaled(Complex::new(T::one() - p, T::zero()), &b.superop);
        Self::from_superop(a.d_in, a.d_out, s)
    }

    /// Channel acting as `self ⊗ other` on a product input.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let (a_in, b_in) = (self.d_in, other.d_in);
        let (a_out, b_out) = (self.d_out, other.d_out);
        let d_in = a_in * b_in;
        let d_out = a_out * b_out;
        let mut s = ComplexMatrix::zeros(d_out * d_out, d_in * d_in);
        // Output (a b, a' b') from input (i k, j l): A[(a a'),(i j)] B[(b b'),(k l)].
        for a in 0..a_out {
            for ap in 0..a_out {
                for b in 0..b_out {
                    for bp in 0..b_out {
                        let row = (a * b_out + b) * d_out + (ap * b_out + bp);
                        for i in 0..a_in {
                            for j in 0..a_in {
                                let x = self.superop[(a * a_out + ap, i * a_in + j)];
                                if x.is_zero() {
                                    continue;
                                }
                                for k in 0..b_in {
                                    for l in 0..b_in {
                                        let y = other.superop[(b * b_out + bp, k * b_in + l)];
                                        s[(row, (i * b_in + k) * d_in + (j * b_in + l))] += x * y;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Self::from_superop(d_in, d_out, s)
    }

    /// Unnormalised Choi matrix, `(d_in·d_out)²` entries, input factor first.
    pub fn choi(&self) -> ComplexMatrix<T> {
        let (di, d_o) = (self.d_in, self.d_out);
        let n = di * d_o;
        ComplexMatrix::from_fn(n, n, |r, c| {
            let (i, a) = (r / d_o, r % d_o);
            let (j, b) = (c / d_o, c % d_o);
            self.superop[(a * d_o + b, i * di + j)]
        })
    }

    /// Rebuilds a channel from its (unnormalised) Choi matrix.
    pub fn from_choi(d_in: usize, d_out: usize, choi: &ComplexMatrix<T>) -> Result<Self> {
        let n = d_in * d_out;
        if choi.rows() != n || choi.cols() != n {
            return Err(Error::DimensionMismatch("Choi matrix size".into()));
        }
        let mut s = ComplexMatrix::zeros(d_out * d_out, d_in * d_in);
        for i in 0..d_in {
            for a in 0..d_out {
                for j in 0..d_in {
                    for b in 0..d_out {
                        s[(a * d_out + b, i * d_in + j)] = choi[(i * d_out + a, j * d_out + b)];
                    }
                }
            }
        }
        Self::from_superop(d_in, d_out, s)
    }

    /// Kraus operators from the Choi eigendecomposition; eigenvalues below
    /// `1e-12` are dropped.
    pub fn kraus(&self) -> Result<Vec<ComplexMatrix<T>>> {
        let eig = eigh(&self.choi())?;
        let cutoff = T::lit(1e-12);
        let (di, d_o) = (self.d_in, self.d_out);
        let mut out = Vec::new();
        for (k, &lambda) in eig.values.iter().enumerate().rev() {
            if lambda <= cutoff {
                continue;
            }
            let s = lambda.sqrt();
            out.push(ComplexMatrix::from_fn(d_o, di, |a, i| {
                eig.vectors[(i * d_o + a, k)] * s
            }));
        }
        Ok(out)
    }

    fn tp_residual(&self) -> T {
        let d = self.d_in;
        let mut acc = T::zero();
        for i in 0..d {
            for j in 0..d {
                let mut sum = Complex::<T>::zero();
                for a in 0..self.d_out {
                    sum += self.superop[(a * self.d_out + a, i * d + j)];
                }
                if i == j {
                    sum -= Complex::one();
                }
                acc += sum.norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Certificate against tolerance `tol`.
    pub fn verify_cpt(&self, tol: T) -> Result<CptReport> {
        let choi = self.choi().hermitian_part();
        let min = eigvalsh(&choi)?[0] / T::lit(self.d_in as f64);
        let tp_residual = self.tp_residual();
        Ok(CptReport {
            cp: min >= -tol,
            tp: tp_residual <= tol,
            min_choi_eig: min.to_f64_lossy(),
            tp_residual: tp_residual.to_f64_lossy(),
        })
    }

    /// Frobenius distance between superoperators.
    pub fn distance(&self, other: &Self) -> Result<T> {
        if self.d_in != other.d_in || self.d_out != other.d_out {
            return Err(Error::DimensionMismatch("comparing channels of different shape".into()));
        }
        Ok(self.superop.distance(&other.superop))
    }

    /// `n`-fold composition with itself.
    pub fn power(&self, n: usize) -> Result<Self> {
        if self.d_in != self.d_out {
            return Err(Error::DimensionMismatch("power of a non-square channel".into()));
        }
        let mut acc = ComplexMatrix::identity(self.d_in * self.d_in);
        for _ in 0..n {
            acc = self.superop.matmul(&acc);
        }
        Self::from_superop(self.d_in, self.d_in, acc)
    }
}

#[cfg(test)]
mod tests;
