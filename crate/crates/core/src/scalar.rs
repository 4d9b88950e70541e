//! Floating-point scalar abstraction shared by the dense linear algebra and
//! channel code.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the matrix and channel code is generic over: `f32` or `f64`.
///
/// Tolerances are associated with the scalar so that the same structural checks
/// are meaningful in single precision.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Tolerance for structural checks: Hermiticity, unit trace, trace preservation.
    fn structural_tol() -> Self;

    /// Tolerance for spectral checks: eigenvalue signs, unitarity.
    fn spectral_tol() -> Self;

    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn structural_tol() -> Self {
        1e-12
    }

    fn spectral_tol() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn structural_tol() -> Self {
        1e-5
    }

    fn spectral_tol() -> Self {
        1e-4
    }
}
