//! Dense complex linear algebra on small multipartite Hilbert spaces.

mod density;
mod eigen;
mod expm;
mod layout;
mod matrix;

use std::fmt;
use std::marker::PhantomData;

use num_complex::Complex;
use serde::de::{self, DeserializeOwned, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use density::DensityMatrix;
pub use eigen::{eigh, eigvalsh, HermitianEigen};
pub use expm::{matrix_exp, unitary_propagator};
pub use layout::{conjugate_local, embed, partial_trace, permutation, HilbertLayout, DIMENSION_CAP};
pub use matrix::ComplexMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Kronecker product `a ⊗ b`.
pub fn kron<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    a.kron(b)
}

/// Outcome of a positivity test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdReport<T> {
    pub is_psd: bool,
    pub min_eigenvalue: T,
}

/// Positive-semidefiniteness test: `is_psd` iff the smallest eigenvalue is at
/// least `-tol`. Non-Hermitian input (beyond `tol`) is an error, not a `false`.
pub fn psd_check<T: Real>(m: &ComplexMatrix<T>, tol: T) -> Result<PsdReport<T>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("psd_check needs a square matrix".into()));
    }
    let dev = m.hermiticity_deviation();
    if dev > tol {
        return Err(Error::NotHermitian {
            deviation: dev.to_f64_lossy(),
        });
    }
    let min_eigenvalue = eigvalsh(m)?[0];
    Ok(PsdReport {
        is_psd: min_eigenvalue >= -tol,
        min_eigenvalue,
    })
}

/// Trace norm `Σ |λ_i|` of a Hermitian matrix.
pub fn trace_norm<T: Real>(m: &ComplexMatrix<T>) -> Result<T> {
    Ok(eigvalsh(m)?.into_iter().map(T::abs).sum())
}

/// `½ ‖a − b‖₁`.
pub fn trace_distance<T: Real>(a: &DensityMatrix<T>, b: &DensityMatrix<T>) -> Result<T> {
    trace_distance_matrices(a.matrix(), b.matrix())
}

/// Trace distance between two Hermitian matrices of equal size, without
/// requiring either to be a validated state.
pub fn trace_distance_matrices<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<T> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "trace distance between {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(trace_norm(&(a - b))? * T::lit(0.5))
}

// Matrices serialize as nested arrays of [re, im] pairs.

impl<T: Real + Serialize> Serialize for ComplexMatrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.rows()))?;
        for i in 0..self.rows() {
            let row: Vec<[T; 2]> = self.row(i).iter().map(|z| [z.re, z.im]).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

impl<'de, T: Real + DeserializeOwned> Deserialize<'de> for ComplexMatrix<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct RowsVisitor<T>(PhantomData<T>);

        impl<'de, T: Real + DeserializeOwned> Visitor<'de> for RowsVisitor<T> {
            type Value = ComplexMatrix<T>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a nested array of [re, im] pairs")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Self::Value, A::Error> {
                let mut rows: Vec<Vec<[T; 2]>> = Vec::new();
                while let Some(row) = seq.next_element()? {
                    rows.push(row);
                }
                let n = rows.len();
                let m = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != m) {
                    return Err(de::Error::custom("ragged matrix rows"));
                }
                let data = rows
                    .into_iter()
                    .flatten()
                    .map(|[re, im]| Complex::new(re, im))
                    .collect();
                ComplexMatrix::from_vec(n, m, data).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_seq(RowsVisitor(PhantomData))
    }
}
