//! Trace-distance revival scan between two initial states.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{trace_distance_matrices, ComplexMatrix};

type M = ComplexMatrix<f64>;

/// Increases smaller than this are treated as roundoff.
pub const REVIVAL_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct WitnessScan {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    /// `(t_start, t_end)` of every step over which the distance grew.
    pub revivals: Vec<(f64, f64)>,
    /// Sum of all increases.
    pub backflow: f64,
}

impl WitnessScan {
    pub fn has_revival(&self) -> bool {
        !self.revivals.is_empty()
    }
}

/// Compares two state series produced by the same evaluator on the same times.
pub fn blp_witness_scan(times: &[f64], first: &[M], second: &[M]) -> Result<WitnessScan> {
    if first.len() != times.len() || second.len() != times.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} times for series of length {} and {}",
            times.len(),
            first.len(),
            second.len()
        )));
    }
    let distances = first
        .iter()
        .zip(second)
        .map(|(a, b)| trace_distance_matrices(a, b))
        .collect::<Result<Vec<_>>>()?;
    let mut revivals = Vec::new();
    let mut backflow = 0.0;
    for k in 1..distances.len() {
        let inc = distances[k] - distances[k - 1];
        if inc > REVIVAL_TOLERANCE {
            backflow += inc;
            match revivals.last_mut() {
                Some((_, end)) if *end == times[k - 1] => *end = times[k],
                _ => revivals.push((times[k - 1], times[k])),
            }
        }
    }
    Ok(WitnessScan {
        times: times.to_vec(),
        distances,
        revivals,
        backflow,
    })
}
