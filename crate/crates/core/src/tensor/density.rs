use num_complex::Complex;
use serde::Serialize;

use super::{eigvalsh, partial_trace, ComplexMatrix, HilbertLayout};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A validated quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct DensityMatrix<T> {
    matrix: ComplexMatrix<T>,
    layout: HilbertLayout,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity and unit trace at the structural tolerance and the
    /// smallest eigenvalue at the spectral tolerance.
    pub fn new(matrix: ComplexMatrix<T>, layout: HilbertLayout) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != layout.total_dim() {
            return Err(Error::InconsistentLayout(format!(
                "layout dimension {} for a {}x{} matrix",
                layout.total_dim(),
                matrix.rows(),
                matrix.cols()
            )));
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite);
        }
        let herm = matrix.hermiticity_deviation();
        if herm > T::structural_tol() {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - T::one()).abs() > T::structural_tol() || tr.im.abs() > T::structural_tol() {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = eigvalsh(&matrix)?[0];
        if min < -T::spectral_tol() {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { matrix, layout })
    }

    /// Single-factor state labelled `label`.
    pub fn with_label(matrix: ComplexMatrix<T>, label: &str) -> Result<Self> {
        let d = matrix.rows();
        Self::new(matrix, HilbertLayout::single(d, label))
    }

    /// Divides by the trace before validating.
    pub fn normalized(matrix: ComplexMatrix<T>, layout: HilbertLayout) -> Result<Self> {
        let tr = matrix.trace().re;
        if !(tr > T::zero()) {
            return Err(Error::InvalidState(format!("cannot normalise trace {tr}")));
        }
        Self::new(matrix.scale_real(T::one() / tr), layout)
    }

    /// |i⟩⟨i| in dimension `d`.
    pub fn basis(d: usize, i: usize, label: &str) -> Result<Self> {
        if i >= d {
            return Err(Error::InvalidParameter(format!("basis index {i} >= dimension {d}")));
        }
        Self::with_label(ComplexMatrix::unit(d, i, i), label)
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalised) vector.
    pub fn pure(psi: &[Complex<T>], label: &str) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if !(norm > T::zero()) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let psi: Vec<Complex<T>> = psi.iter().map(|z| z / norm).collect();
        Self::with_label(ComplexMatrix::outer(&psi, &psi), label)
    }

    pub fn maximally_mixed(d: usize, label: &str) -> Self {
        Self {
            matrix: ComplexMatrix::identity(d).scale_real(T::one() / T::lit(d as f64)),
            layout: HilbertLayout::single(d, label),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.matrix
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Same matrix, new factor structure.
    pub fn relabel(self, layout: HilbertLayout) -> Result<Self> {
        if layout.total_dim() != self.dim() {
            return Err(Error::InconsistentLayout("relabel changes dimension".into()));
        }
        Ok(Self {
            matrix: self.matrix,
            layout,
        })
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            matrix: self.matrix.kron(&other.matrix),
            layout: self.layout.tensor(&other.layout)?,
        })
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        let m = partial_trace(&self.matrix, &self.layout, keep)?;
        Self::new(m, self.layout.restrict(keep)?)
    }

    /// Bloch vector (⟨X⟩, ⟨Y⟩, ⟨Z⟩) of a qubit state.
    pub fn bloch_vector(&self) -> Option<[T; 3]> {
        (self.dim() == 2).then(|| {
            let m = &self.matrix;
            let two = T::lit(2.0);
            [two * m[(0, 1)].re, -two * m[(0, 1)].im, m[(0, 0)].re - m[(1, 1)].re]
        })
    }

    /// Qubit state from a Bloch vector of length at most one.
    pub fn from_bloch(r: [T; 3], label: &str) -> Result<Self> {
        let half = T::lit(0.5);
        let m = ComplexMatrix::from_vec(
            2,
            2,
            vec![
                Complex::new(half * (T::one() + r[2]), T::zero()),
                Complex::new(half * r[0], -half * r[1]),
                Complex::new(half * r[0], half * r[1]),
                Complex::new(half * (T::one() - r[2]), T::zero()),
            ],
        )?;
        Self::with_label(m, label)
    }
}
