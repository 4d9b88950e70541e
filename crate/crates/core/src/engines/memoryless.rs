use crate::channels::QuantumChannel;
use crate::error::{Error, Result};
use crate::tensor::{partial_trace, ComplexMatrix, DensityMatrix, HilbertLayout};

type M = ComplexMatrix<f64>;

/// `Φ[ρ] = Tr_n{U (ρ ⊗ η) U†}` for a collision unitary `U` on system ⊗ ancilla.
pub fn memoryless_channel(eta: &DensityMatrix<f64>, u: &M) -> Result<QuantumChannel<f64>> {
    let d_a = eta.dim();
    if !u.is_square() || !u.rows().is_multiple_of(d_a) {
        return Err(Error::DimensionMismatch(format!(
            "collision unitary of size {} with ancilla dimension {d_a}",
            u.rows()
        )));
    }
    let dev = u.unitarity_deviation();
    if dev > 1e-10 {
        return Err(Error::NotUnitary { deviation: dev });
    }
    let d_s = u.rows() / d_a;
    let layout = HilbertLayout::new(vec![d_s, d_a], vec!["S", "n"])?;
    QuantumChannel::from_linear_map(d_s, d_s, |rho| {
        partial_trace(&rho.kron(eta.matrix()).conjugate_by(u), &layout, &["S"])
    })
}

/// `ρ_n = Φⁿ[ρ₀]` for `n = 0..=n_steps`.
pub fn run_memoryless_cm(
    eta: &DensityMatrix<f64>,
    u: &M,
    rho0: &DensityMatrix<f64>,
    n_steps: usize,
) -> Result<Vec<DensityMatrix<f64>>> {
    let phi = memoryless_channel(eta, u)?;
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(rho0.clone());
    for _ in 0..n_steps {
        let next = phi.apply(out.last().expect("nonempty"))?;
        out.push(next);
    }
    Ok(out)
}
