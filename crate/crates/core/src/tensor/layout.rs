use std::collections::HashSet;

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::ComplexMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest composite dimension handled by the dense algebra.
pub const DIMENSION_CAP: usize = 4096;

/// Ordered tensor-factor description of a composite Hilbert space.
///
/// Composite indices are row-major: the leftmost factor is the most
/// significant digit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLayout", into = "RawLayout")]
pub struct HilbertLayout {
    dims: Vec<usize>,
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawLayout {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl TryFrom<RawLayout> for HilbertLayout {
    type Error = Error;

    fn try_from(raw: RawLayout) -> Result<Self> {
        HilbertLayout::new(raw.dims, raw.labels)
    }
}

impl From<HilbertLayout> for RawLayout {
    fn from(l: HilbertLayout) -> Self {
        RawLayout {
            dims: l.dims,
            labels: l.labels,
        }
    }
}

impl HilbertLayout {
    pub fn new<S: Into<String>>(dims: Vec<usize>, labels: Vec<S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if dims.is_empty() || dims.len() != labels.len() {
            return Err(Error::InconsistentLayout(format!(
                "{} dims for {} labels",
                dims.len(),
                labels.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InconsistentLayout("zero factor dimension".into()));
        }
        let unique: HashSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(Error::InconsistentLayout(format!("duplicate labels in {labels:?}")));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX);
        if total > DIMENSION_CAP {
            return Err(Error::DimensionCap {
                dim: total,
                cap: DIMENSION_CAP,
            });
        }
        Ok(Self { dims, labels })
    }

    /// A single factor.
    pub fn single(dim: usize, label: &str) -> Self {
        Self::new(vec![dim], vec![label]).expect("valid single-factor layout")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    /// Concatenation `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        Self::new(dims, labels)
    }

    /// Sub-layout of the given labels, in layout order.
    pub fn restrict(&self, keep: &[&str]) -> Result<Self> {
        let mut pos = self.positions(keep)?;
        pos.sort_unstable();
        Self::new(
            pos.iter().map(|&p| self.dims[p]).collect(),
            pos.iter().map(|&p| self.labels[p].clone()).collect(),
        )
    }

    fn positions(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        labels
            .iter()
            .map(|l| {
                let p = self.position(l)?;
                if !seen.insert(p) {
                    return Err(Error::InconsistentLayout(format!("label `{l}` repeated")));
                }
                Ok(p)
            })
            .collect()
    }

    fn check_matrix<T: Real>(&self, m: &ComplexMatrix<T>) -> Result<()> {
        if !m.is_square() || m.rows() != self.total_dim() {
            return Err(Error::InconsistentLayout(format!(
                "layout of dimension {} does not describe a {}x{} matrix",
                self.total_dim(),
                m.rows(),
                m.cols()
            )));
        }
        Ok(())
    }

    /// For every composite index: (index within `selected` factors, taken in
    /// the given order; index within the remaining factors, in layout order).
    fn split_indices(&self, selected: &[usize]) -> Vec<(usize, usize)> {
        let rest: Vec<usize> = (0..self.dims.len()).filter(|p| !selected.contains(p)).collect();
        let n = self.total_dim();
        let mut digits = vec![0usize; self.dims.len()];
        let mut out = Vec::with_capacity(n);
        for idx in 0..n {
            let mut r = idx;
            for p in (0..self.dims.len()).rev() {
                digits[p] = r % self.dims[p];
                r /= self.dims[p];
            }
            let sel = selected.iter().fold(0, |acc, &p| acc * self.dims[p] + digits[p]);
            let rem = rest.iter().fold(0, |acc, &p| acc * self.dims[p] + digits[p]);
            out.push((sel, rem));
        }
        out
    }

    /// `groups[r][s]` is the composite index whose selected part is `s` and
    /// remaining part is `r`.
    fn grouped(&self, selected: &[usize]) -> Vec<Vec<usize>> {
        let sel_dim: usize = selected.iter().map(|&p| self.dims[p]).product();
        let rest_dim = self.total_dim() / sel_dim;
        let mut groups = vec![vec![0usize; sel_dim]; rest_dim];
        for (idx, (s, r)) in self.split_indices(selected).into_iter().enumerate() {
            groups[r][s] = idx;
        }
        groups
    }
}

/// Traces out every factor not listed in `keep`; kept factors stay in layout order.
pub fn partial_trace<T: Real>(
    m: &ComplexMatrix<T>,
    layout: &HilbertLayout,
    keep: &[&str],
) -> Result<ComplexMatrix<T>> {
    layout.check_matrix(m)?;
    let mut kept = layout.positions(keep)?;
    kept.sort_unstable();
    let groups = layout.grouped(&kept);
    let kd = groups.first().map_or(1, Vec::len);
    let mut out = ComplexMatrix::zeros(kd, kd);
    for g in &groups {
        for (a, &ia) in g.iter().enumerate() {
            let row = m.row(ia);
            for (b, &ib) in g.iter().enumerate() {
                out[(a, b)] += row[ib];
            }
        }
    }
    Ok(out)
}

/// Lifts `op`, acting on `targets` (in the order given), to the full space.
pub fn embed<T: Real>(
    op: &ComplexMatrix<T>,
    layout: &HilbertLayout,
    targets: &[&str],
) -> Result<ComplexMatrix<T>> {
    let pos = layout.positions(targets)?;
    let td: usize = pos.iter().map(|&p| layout.dims[p]).product();
    if !op.is_square() || op.rows() != td {
        return Err(Error::DimensionMismatch(format!(
            "operator of size {}x{} on factors {targets:?} of dimension {td}",
            op.rows(),
            op.cols()
        )));
    }
    let n = layout.total_dim();
    let mut out = ComplexMatrix::zeros(n, n);
    for g in layout.grouped(&pos) {
        for (a, &ia) in g.iter().enumerate() {
            for (b, &ib) in g.iter().enumerate() {
                let v = op[(a, b)];
                if !v.is_zero() {
                    out[(ia, ib)] = v;
                }
            }
        }
    }
    Ok(out)
}

/// `(op ⊗ I) m (op ⊗ I)†` with `op` acting on `targets`, without forming the
/// embedded operator.
pub fn conjugate_local<T: Real>(
    m: &ComplexMatrix<T>,
    op: &ComplexMatrix<T>,
    layout: &HilbertLayout,
    targets: &[&str],
) -> Result<ComplexMatrix<T>> {
    layout.check_matrix(m)?;
    let pos = layout.positions(targets)?;
    let td: usize = pos.iter().map(|&p| layout.dims[p]).product();
    if !op.is_square() || op.rows() != td {
        return Err(Error::DimensionMismatch(format!(
            "operator of size {}x{} on factors {targets:?} of dimension {td}",
            op.rows(),
            op.cols()
        )));
    }
    let groups = layout.grouped(&pos);
    let left = |x: &ComplexMatrix<T>| {
        let n = x.rows();
        let mut out = ComplexMatrix::zeros(n, n);
        let mut buf = vec![Complex::<T>::zero(); td];
        for g in &groups {
            for c in 0..n {
                for (b, &ib) in g.iter().enumerate() {
                    buf[b] = x[(ib, c)];
                }
                for (a, &ia) in g.iter().enumerate() {
                    let row = op.row(a);
                    let mut acc = Complex::<T>::zero();
                    for b in 0..td {
                        acc += row[b] * buf[b];
                    }
                    out[(ia, c)] = acc;
                }
            }
        }
        out
    };
    let once = left(m).adjoint();
    Ok(left(&once).adjoint())
}

/// Permutation matrix reordering the factors: the result maps a state laid out
/// as `layout` to the same state laid out in `order`.
pub fn permutation<T: Real>(layout: &HilbertLayout, order: &[&str]) -> Result<ComplexMatrix<T>> {
    let pos = layout.positions(order)?;
    if pos.len() != layout.dims.len() {
        return Err(Error::InconsistentLayout("permutation must list every factor".into()));
    }
    let n = layout.total_dim();
    let mut out = ComplexMatrix::zeros(n, n);
    for (idx, (s, _)) in layout.split_indices(&pos).into_iter().enumerate() {
        out[(s, idx)] = Complex::new(T::one(), T::zero());
    }
    Ok(out)
}
