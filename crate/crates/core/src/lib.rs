//! Simulation and verification of piecewise non-Markovian open-system dynamics
//! generated by collision models with memory.
//!
//! The linear algebra and channel layers are generic over the scalar
//! ([`Real`] is implemented for `f32` and `f64`); the engines and evaluators
//! work in `f64` through the aliases below.

pub mod channels;
pub mod engines;
pub mod error;
pub mod evaluators;
pub mod random;
pub mod renewal;
pub mod scalar;
pub mod stats;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision complex matrix.
pub type CMatrix = tensor::ComplexMatrix<f64>;
/// Double-precision density matrix.
pub type Density = tensor::DensityMatrix<f64>;
/// Double-precision channel.
pub type Channel = channels::QuantumChannel<f64>;

pub type CMatrix32 = tensor::ComplexMatrix<f32>;
pub type Density32 = tensor::DensityMatrix<f32>;
pub type Channel32 = channels::QuantumChannel<f32>;
