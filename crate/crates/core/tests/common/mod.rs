//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex;
use piecewise_cm::channels::QuantumChannel;
use piecewise_cm::engines::{CmConfig, StepReading};
use piecewise_cm::evaluators::{PiecewiseSpec, WeightOrdering};
use piecewise_cm::renewal::StepSchedule;
use piecewise_cm::tensor::{eigvalsh, ComplexMatrix, DensityMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type M = ComplexMatrix<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(x: f64) -> Complex<f64> {
    Complex::new(x, 0.0)
}

/// No-jump probability of collision `l` (1-based) when the previous jump
/// happened at collision `last` (0: none yet).
pub fn p_of(sched: &StepSchedule, reading: StepReading, l: usize, last: usize) -> f64 {
    match reading {
        StepReading::Age => sched.p(l - last - 1),
        StepReading::Absolute => sched.p(l - 1),
    }
}

/// The S⊗M state after step `n ∈ {2, 3, 4}` written out term by term:
/// `U` is the step unitary map, `Z` the bipartite jump, `p_l`/`q_l` the
/// collision probabilities. Maps compose right to left.
pub fn step_expansion(config: &CmConfig, n: usize, reading: StepReading) -> M {
    let sched = config.hazard.schedule(config.tau, n).unwrap();
    let u = QuantumChannel::unitary(&config.step_unitary().unwrap()).unwrap();
    let z = config.bipartite_jump().unwrap();
    let rho0 = config.initial_state();
    let p = |l: usize, last: usize| p_of(&sched, reading, l, last);
    let q = |l: usize, last: usize| 1.0 - p(l, last);
    // word: sequence of 'U'/'Z' applied left-to-right in time order.
    let apply = |word: &str| -> M {
        let mut r = rho0.clone();
        for ch in word.chars() {
            r = match ch {
                'U' => u.apply_operator(&r).unwrap(),
                'Z' => z.apply_operator(&r).unwrap(),
                _ => unreachable!(),
            };
        }
        r
    };
    let terms: Vec<(f64, &str)> = match n {
        2 => vec![(p(1, 0), "UU"), (q(1, 0), "UZU")],
        3 => vec![
            (p(2, 0) * p(1, 0), "UUU"),
            (p(2, 1) * q(1, 0), "UZUU"),
            (q(2, 0) * p(1, 0), "UUZU"),
            (q(2, 1) * q(1, 0), "UZUZU"),
        ],
        4 => vec![
            (p(3, 0) * p(2, 0) * p(1, 0), "UUUU"),
            (p(3, 1) * p(2, 1) * q(1, 0), "UZUUU"),
            (p(3, 2) * q(2, 0) * p(1, 0), "UUZUU"),
            // printed as q3 q2 p1 in the source derivation; the jump-free
            // collision 2 must contribute p2.
            (q(3, 0) * p(2, 0) * p(1, 0), "UUUZU"),
            (p(3, 2) * q(2, 1) * q(1, 0), "UZUZUU"),
            (q(3, 1) * p(2, 1) * q(1, 0), "UZUUZU"),
            (q(3, 2) * q(2, 0) * p(1, 0), "UUZUZU"),
            (q(3, 2) * q(2, 1) * q(1, 0), "UZUZUZU"),
        ],
        _ => panic!("expansions are written out for n = 2, 3, 4"),
    };
    let d = rho0.rows();
    let mut out = M::zeros(d, d);
    for (w, word) in terms {
        out.add_scaled(c(w), &apply(word));
    }
    out
}

/// All strictly increasing tuples `k₁ < … < k_j` drawn from `1..=m`.
pub fn increasing_tuples(m: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << m))
        .map(|mask| (1..=m).filter(|k| mask & (1 << (k - 1)) != 0).collect())
        .collect()
}

/// Probability of jumping exactly at collisions `ks` during `n` steps:
/// `(Π_{l>k_j} p_l) q_{k_j} (Π p_l) q_{k_{j−1}} … q_{k₁} (Π_{l<k₁} p_l)`.
pub fn pi_weight(ks: &[usize], n: usize, sched: &StepSchedule, reading: StepReading) -> f64 {
    let mut w = 1.0;
    let mut last = 0;
    let mut next = ks.iter().peekable();
    for l in 1..n {
        if next.peek() == Some(&&l) {
            w *= 1.0 - p_of(sched, reading, l, last);
            last = l;
            next.next();
        } else {
            w *= p_of(sched, reading, l, last);
        }
    }
    w
}

/// Explicit zero-, one- and two-jump terms of the series at grid point `k`,
/// each nested integral by the trapezoid rule on the spec's grid.
pub fn nested_trapezoid_up_to_two(spec: &PiecewiseSpec, before: &[M], after: &[M], rho0: &M, k: usize) -> M {
    let h = spec.step();
    let f = |t: f64| spec.hazard.density(t).unwrap();
    let g = |t: f64| spec.hazard.survival(t).unwrap();
    let w = |i: usize, n: usize| if n == 0 { 0.0 } else if i == 0 || i == n { 0.5 * h } else { h };
    let z = spec.jump.superop();
    let apply = |s: &M, r: &M| M::from_vec(r.rows(), r.cols(), s.matvec(r.as_slice())).unwrap();
    let t = k as f64 * h;
    let mut out = apply(&before[k], rho0).scale_real(g(t));
    let renewal = spec.ordering == WeightOrdering::Renewal;
    for m1 in 0..=k {
        let t1 = m1 as f64 * h;
        let first = apply(z, &apply(&before[m1], rho0));
        // one jump
        let wt = if renewal { f(t1) * g(t - t1) } else { g(t1) * f(t - t1) };
        out.add_scaled(c(w(m1, k) * wt), &apply(&after[k - m1], &first));
        // two jumps: t1 outer, t2 ∈ [t1, t] inner
        for m2 in m1..=k {
            let t2 = m2 as f64 * h;
            let wt = if renewal {
                f(t1) * f(t2 - t1) * g(t - t2)
            } else {
                g(t1) * f(t2 - t1) * f(t - t2)
            };
            let second = apply(&after[k - m2], &apply(z, &apply(&after[m2 - m1], &first)));
            out.add_scaled(c(w(m1, k) * w(m2 - m1, k - m1) * wt), &second);
        }
    }
    out
}

/// Records invariant violations across a run.
#[derive(Default)]
pub struct InvariantLog {
    pub states: usize,
    pub channels: usize,
    pub failures: Vec<String>,
}

impl InvariantLog {
    /// Unit trace within `trace_tol`, Hermitian, smallest eigenvalue ≥ −1e−10.
    pub fn state(&mut self, what: &str, m: &M, trace_tol: f64) {
        self.states += 1;
        let tr = m.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            self.failures.push(format!("{what}: trace {tr}"));
        }
        if m.hermiticity_deviation() > 1e-10 {
            self.failures.push(format!("{what}: not Hermitian"));
            return;
        }
        let min = eigvalsh(m).unwrap()[0];
        if min < -1e-10 {
            self.failures.push(format!("{what}: eigenvalue {min:e}"));
        }
    }

    pub fn density(&mut self, what: &str, d: &DensityMatrix<f64>) {
        self.state(what, d.matrix(), 1e-12);
    }

    pub fn channel(&mut self, what: &str, ch: &QuantumChannel<f64>) {
        self.channels += 1;
        let r = ch.verify_cpt(1e-10).unwrap();
        if !r.is_cpt() {
            self.failures.push(format!("{what}: min Choi {:e}, TP {:e}", r.min_choi_eig, r.tp_residual));
        }
    }
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}
