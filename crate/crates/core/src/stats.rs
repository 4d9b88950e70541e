//! Streaming moments of matrix-valued samples, Monte Carlo comparisons and
//! convergence-order fits.

use num_complex::Complex;
use serde::Serialize;

use crate::tensor::ComplexMatrix;

type M = ComplexMatrix<f64>;

fn componentwise(a: Complex<f64>, b: Complex<f64>) -> Complex<f64> {
    Complex::new(a.re * b.re, a.im * b.im)
}

/// Welford mean and centred second moments, per slot and per entry; real and
/// imaginary parts are treated as separate components.
#[derive(Clone, Debug)]
pub struct MatrixMoments {
    count: f64,
    mean: Vec<M>,
    m2: Vec<M>,
}

impl MatrixMoments {
    pub fn new(slots: usize, rows: usize, cols: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![M::zeros(rows, cols); slots],
            m2: vec![M::zeros(rows, cols); slots],
        }
    }

    /// Starts a new sample; each sample then fills its slots with [`Self::push`].
    pub fn begin_sample(&mut self) {
        self.count += 1.0;
    }

    pub fn push(&mut self, slot: usize, x: &M) {
        let n = self.count;
        let mean = self.mean[slot].as_mut_slice();
        let m2 = self.m2[slot].as_mut_slice();
        for ((mu, q), &v) in mean.iter_mut().zip(m2.iter_mut()).zip(x.as_slice()) {
            let delta = v - *mu;
            *mu += delta / n;
            *q += componentwise(delta, v - *mu);
        }
    }

    /// Combines two disjoint sample sets (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &Self) {
        let (na, nb) = (self.count, other.count);
        if nb == 0.0 {
            return;
        }
        let n = na + nb;
        for slot in 0..self.mean.len() {
            let mean = self.mean[slot].as_mut_slice();
            let m2 = self.m2[slot].as_mut_slice();
            for (k, (&mb, &qb)) in other.mean[slot].as_slice().iter().zip(other.m2[slot].as_slice()).enumerate() {
                let delta = mb - mean[k];
                mean[k] += delta * (nb / n);
                m2[k] += qb + componentwise(delta, delta) * (na * nb / n);
            }
        }
        self.count = n;
    }

    pub fn count(&self) -> usize {
        self.count as usize
    }

    pub fn means(&self) -> &[M] {
        &self.mean
    }

    /// Standard error of each mean entry (real and imaginary parts packed).
    pub fn standard_errors(&self) -> Vec<M> {
        let n = self.count;
        let se = |q: f64| {
            if n > 1.0 {
                (q.max(0.0) / (n - 1.0) / n).sqrt()
            } else {
                0.0
            }
        };
        self.m2.iter().map(|m| m.map(|q| Complex::new(se(q.re), se(q.im)))).collect()
    }
}

/// Deviation of a Monte Carlo mean from a reference, in units of its
/// standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StatComparison {
    /// Euclidean norm of the deviation over all real components.
    pub distance: f64,
    /// Root-sum-square of the component standard errors.
    pub combined_stderr: f64,
    /// Largest single-component |deviation| / standard error, ignoring
    /// deviations at the noise floor.
    pub max_component_z: f64,
}

impl StatComparison {
    pub fn new(reference: &M, mean: &M, stderr: &M) -> Self {
        let mut dist2 = 0.0;
        let mut se2 = 0.0;
        let mut max_z: f64 = 0.0;
        for ((r, m), s) in reference.as_slice().iter().zip(mean.as_slice()).zip(stderr.as_slice()) {
            for (d, e) in [((m - r).re, s.re), ((m - r).im, s.im)] {
                dist2 += d * d;
                se2 += e * e;
                if d.abs() <= NOISE_FLOOR {
                    continue;
                }
                max_z = max_z.max(if e > 0.0 { d.abs() / e } else { f64::INFINITY });
            }
        }
        Self {
            distance: dist2.sqrt(),
            combined_stderr: se2.sqrt(),
            max_component_z: max_z,
        }
    }

    /// `distance ≤ k · combined_stderr` (with a 1e-12 allowance for
    /// zero-variance estimates).
    pub fn within(&self, k: f64) -> bool {
        self.distance <= k * self.combined_stderr + 1e-12
    }
}

/// Least-squares fit `log e = order · log h + c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrderFit {
    pub order: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Errors at or below this are treated as numerical noise.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Fits the convergence order; `None` when fewer than two errors lie above
/// [`NOISE_FLOOR`].
pub fn fit_order(steps: &[f64], errors: &[f64]) -> Option<OrderFit> {
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > NOISE_FLOOR)
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 || pts.len() < steps.len() {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let order = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some(OrderFit {
        order,
        intercept: my - order * mx,
        r_squared,
    })
}
