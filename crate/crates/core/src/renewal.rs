//! Waiting-time distributions given by a hazard function, the per-step
//! no-jump probabilities of the discrete collision model, and renewal sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cumulative hazard at which the default domain ends (`g = e^{-50}`).
const DOMAIN_CUMULATIVE: f64 = 50.0;
/// Time resolution of inverse-transform sampling.
const SAMPLE_RESOLUTION: f64 = 1e-12;

/// Shape of the hazard function φ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HazardKind {
    /// φ(t) = Γ.
    Constant { gamma: f64 },
    /// φ(t) = a·t^b.
    Power { a: f64, b: f64 },
    /// Linear interpolation of `(times, values)`, constant beyond both ends.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
struct RawHazard {
    #[serde(flatten)]
    kind: HazardKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain_max: Option<f64>,
}

/// A validated hazard function together with its time domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHazard", into = "RawHazard")]
pub struct HazardSpec {
    kind: HazardKind,
    domain_max: f64,
    /// Cumulative hazard at the tabulation nodes.
    nodes: Vec<f64>,
}

impl TryFrom<RawHazard> for HazardSpec {
    type Error = Error;

    fn try_from(raw: RawHazard) -> Result<Self> {
        let spec = Self::new(raw.kind)?;
        match raw.domain_max {
            Some(d) => spec.with_domain_max(d),
            None => Ok(spec),
        }
    }
}

impl From<HazardSpec> for RawHazard {
    fn from(h: HazardSpec) -> Self {
        let explicit = h.domain_max != h.default_domain_max();
        RawHazard {
            domain_max: explicit.then_some(h.domain_max),
            kind: h.kind,
        }
    }
}

impl HazardSpec {
    pub fn new(kind: HazardKind) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidHazard(msg));
        let mut nodes = Vec::new();
        match &kind {
            HazardKind::Constant { gamma } => {
                if !(gamma.is_finite() && *gamma >= 0.0) {
                    return bad(format!("rate {gamma} must be finite and nonnegative"));
                }
            }
            HazardKind::Power { a, b } => {
                if !(a.is_finite() && *a >= 0.0) {
                    return bad(format!("scale {a} must be finite and nonnegative"));
                }
                if !(b.is_finite() && *b >= 0.0) {
                    return bad(format!("exponent {b} must be finite and nonnegative"));
                }
            }
            HazardKind::Tabulated { times, values } => {
                if times.len() != values.len() || times.is_empty() {
                    return bad("tabulated hazard needs equally long, nonempty arrays".into());
                }
                if times.iter().chain(values).any(|x| !x.is_finite()) {
                    return bad("tabulated hazard has non-finite entries".into());
                }
                if times[0] < 0.0 {
                    return bad("tabulated times must be nonnegative".into());
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("tabulated times must be strictly increasing".into());
                }
                if values.iter().any(|&v| v < 0.0) {
                    return bad("tabulated hazard values must be nonnegative".into());
                }
                // Exact integral of the interpolant, constant before the first node.
                let mut acc = values[0] * times[0];
                nodes.push(acc);
                for k in 1..times.len() {
                    acc += 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]);
                    nodes.push(acc);
                }
            }
        }
        let mut spec = Self {
            kind,
            domain_max: f64::INFINITY,
            nodes,
        };
        spec.domain_max = spec.default_domain_max();
        Ok(spec)
    }

    pub fn constant(gamma: f64) -> Result<Self> {
        Self::new(HazardKind::Constant { gamma })
    }

    pub fn power(a: f64, b: f64) -> Result<Self> {
        Self::new(HazardKind::Power { a, b })
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(HazardKind::Tabulated { times, values })
    }

    /// φ ≡ 0: no jumps ever.
    pub fn none() -> Self {
        Self::constant(0.0).expect("zero hazard")
    }

    /// Overrides the domain; must be positive.
    pub fn with_domain_max(mut self, domain_max: f64) -> Result<Self> {
        if !(domain_max > 0.0) {
            return Err(Error::InvalidHazard(format!("domain_max {domain_max} must be positive")));
        }
        self.domain_max = domain_max;
        Ok(self)
    }

    fn default_domain_max(&self) -> f64 {
        match &self.kind {
            HazardKind::Constant { gamma } => {
                if *gamma > 0.0 {
                    DOMAIN_CUMULATIVE / gamma
                } else {
                    f64::INFINITY
                }
            }
            HazardKind::Power { a, b } => {
                if *a > 0.0 {
                    (DOMAIN_CUMULATIVE * (b + 1.0) / a).powf(1.0 / (b + 1.0))
                } else {
                    f64::INFINITY
                }
            }
            HazardKind::Tabulated { times, values } => {
                let span = times[times.len() - 1] - times[0];
                let mean = if span > 0.0 {
                    (self.nodes[self.nodes.len() - 1] - self.nodes[0]) / span
                } else {
                    values[0]
                };
                if mean > 0.0 {
                    DOMAIN_CUMULATIVE / mean
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn kind(&self) -> &HazardKind {
        &self.kind
    }

    pub fn domain_max(&self) -> f64 {
        self.domain_max
    }

    /// The rate when φ is constant.
    pub fn constant_rate(&self) -> Option<f64> {
        match &self.kind {
            HazardKind::Constant { gamma } => Some(*gamma),
            HazardKind::Power { a, .. } if *a == 0.0 => Some(0.0),
            HazardKind::Tabulated { values, .. } if values.iter().all(|&v| v == values[0]) => {
                Some(values[0])
            }
            _ => None,
        }
    }

    /// True when φ vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.constant_rate() == Some(0.0)
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t <= self.domain_max * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                t,
                max: self.domain_max,
            })
        }
    }

    /// φ(t).
    pub fn hazard(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(match &self.kind {
            HazardKind::Constant { gamma } => *gamma,
            HazardKind::Power { a, b } => {
                if *b == 0.0 {
                    *a
                } else {
                    a * t.powf(*b)
                }
            }
            HazardKind::Tabulated { times, values } => {
                let k = times.partition_point(|&x| x <= t);
                if k == 0 {
                    values[0]
                } else if k == times.len() {
                    values[k - 1]
                } else {
                    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    values[k - 1] + w * (values[k] - values[k - 1])
                }
            }
        })
    }

    /// `∫₀ᵗ φ`.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.cumulative_unchecked(t))
    }

    fn cumulative_unchecked(&self, t: f64) -> f64 {
        match &self.kind {
            HazardKind::Constant { gamma } => gamma * t,
            HazardKind::Power { a, b } => a * t.powf(b + 1.0) / (b + 1.0),
            HazardKind::Tabulated { times, values } => {
                let k = times.partition_point(|&x| x <= t);
                if k == 0 {
                    values[0] * t
                } else if k == times.len() {
                    self.nodes[k - 1] + values[k - 1] * (t - times[k - 1])
                } else {
                    let (t0, v0) = (times[k - 1], values[k - 1]);
                    let slope = (values[k] - v0) / (times[k] - t0);
                    let dt = t - t0;
                    self.nodes[k - 1] + v0 * dt + 0.5 * slope * dt * dt
                }
            }
        }
    }

    /// `∫_{t₁}^{t₂} φ`.
    pub fn cumulative_between(&self, t1: f64, t2: f64) -> Result<f64> {
        self.check_domain(t1)?;
        self.check_domain(t2)?;
        Ok(match &self.kind {
            HazardKind::Constant { gamma } => gamma * (t2 - t1),
            _ => self.cumulative_unchecked(t2) - self.cumulative_unchecked(t1),
        })
    }

    /// Survival probability `g(t) = exp(−∫₀ᵗ φ)`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        Ok((-self.cumulative(t)?).exp())
    }

    /// Waiting-time density `f(t) = φ(t)·g(t)`.
    pub fn density(&self, t: f64) -> Result<f64> {
        Ok(self.hazard(t)? * self.survival(t)?)
    }

    /// `exp(−∫_{aτ}^{(a+1)τ} φ)`: probability of no jump during the step that
    /// starts `age` steps after the last jump.
    pub fn step_no_jump_prob(&self, tau: f64, age: usize) -> Result<f64> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("time step {tau} must be positive")));
        }
        let t0 = age as f64 * tau;
        Ok((-self.cumulative_between(t0, t0 + tau)?).exp())
    }

    /// Per-age step probabilities for ages `0..ages`.
    pub fn schedule(&self, tau: f64, ages: usize) -> Result<StepSchedule> {
        let p = (0..ages)
            .map(|a| self.step_no_jump_prob(tau, a))
            .collect::<Result<Vec<_>>>()?;
        Ok(StepSchedule { tau, p })
    }

    /// One waiting time by inverse transform, or `None` if it exceeds `limit`.
    pub fn sample_waiting_time<R: Rng + ?Sized>(&self, limit: f64, rng: &mut R) -> Option<f64> {
        let u: f64 = 1.0 - rng.random::<f64>();
        let target = -u.ln();
        if self.cumulative_unchecked(limit) <= target {
            return None;
        }
        let (mut lo, mut hi) = (0.0, limit);
        while hi - lo > SAMPLE_RESOLUTION {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cumulative_unchecked(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Renewal jump times `s₁ < … < s_j` in `[0, horizon]`.
    pub fn sample_renewal<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<Vec<f64>> {
        self.check_domain(horizon)?;
        let mut out = Vec::new();
        if self.is_zero() {
            return Ok(out);
        }
        let mut now = 0.0;
        while let Some(w) = self.sample_waiting_time(horizon - now, rng) {
            now += w;
            out.push(now);
        }
        Ok(out)
    }

    /// Time-reversed renewal sequence `t_i = horizon − s_{j+1−i}`; the joint
    /// density of `(j; t₁ … t_j)` is `f(T−t_j)…f(t₂−t₁)·g(t₁)`.
    pub fn sample_reversed_renewal<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<Vec<f64>> {
        let forward = self.sample_renewal(horizon, rng)?;
        Ok(reverse_times(&forward, horizon))
    }
}

/// Maps jump times on `[0, horizon]` to their mirror images, in increasing order.
pub fn reverse_times(times: &[f64], horizon: f64) -> Vec<f64> {
    times.iter().rev().map(|&s| horizon - s).collect()
}

/// Per-step no-jump probabilities indexed by age.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepSchedule {
    tau: f64,
    p: Vec<f64>,
}

impl StepSchedule {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `p_step(age)`; panics beyond the tabulated ages.
    pub fn p(&self, age: usize) -> f64 {
        self.p[age]
    }

    pub fn q(&self, age: usize) -> f64 {
        1.0 - self.p[age]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Composite Simpson oracle on `n` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn constant_hazard_closed_forms() {
        let h = HazardSpec::constant(1.3).unwrap();
        for &t in &[0.0, 0.4, 2.0] {
            assert!((h.survival(t).unwrap() - (-1.3 * t).exp()).abs() < 1e-15);
            assert!((h.density(t).unwrap() - 1.3 * (-1.3 * t).exp()).abs() < 1e-15);
        }
        for a in 0..20 {
            assert!((h.step_no_jump_prob(0.1, a).unwrap() - (-0.13f64).exp()).abs() < 1e-15);
        }
        assert!((h.domain_max() - 50.0 / 1.3).abs() < 1e-12);
        assert!(h.survival(40.0).is_err());
    }

    #[test]
    fn zero_hazard() {
        let h = HazardSpec::none();
        assert_eq!(h.survival(1e6).unwrap(), 1.0);
        assert_eq!(h.density(3.0).unwrap(), 0.0);
        assert_eq!(h.step_no_jump_prob(0.5, 7).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(h.sample_renewal(100.0, &mut rng).unwrap().is_empty());
        assert!(h.sample_reversed_renewal(100.0, &mut rng).unwrap().is_empty());
        assert!(h.is_zero());
    }

    #[test]
    fn rayleigh_survival_matches_quadrature() {
        let h = HazardSpec::power(2.0, 1.0).unwrap();
        for &t in &[0.3, 1.0, 2.2] {
            let lam = simpson(|s| 2.0 * s, 0.0, t, 200);
            assert!((h.survival(t).unwrap() - (-lam).exp()).abs() < 1e-13);
            assert!((h.survival(t).unwrap() - (-t * t).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn telescoping_step_probabilities() {
        for h in [
            HazardSpec::power(0.8, 1.5).unwrap(),
            HazardSpec::tabulated(vec![0.0, 0.5, 1.0, 3.0], vec![0.2, 1.0, 0.4, 0.7]).unwrap(),
        ] {
            let tau = 0.03;
            let sched = h.schedule(tau, 100).unwrap();
            let prod: f64 = sched.as_slice().iter().product();
            assert!((prod - h.survival(100.0 * tau).unwrap()).abs() < 1e-12);
            assert!(sched.as_slice().iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn normalisation_and_hazard_reconstruction() {
        let specs = [
            HazardSpec::constant(0.9).unwrap(),
            HazardSpec::power(1.5, 2.0).unwrap(),
            HazardSpec::tabulated(vec![0.0, 0.5, 1.0, 3.0], vec![0.2, 1.0, 0.4, 0.7]).unwrap(),
        ];
        for h in &specs {
            let knots: Vec<f64> = match h.kind() {
                HazardKind::Tabulated { times, .. } => times.clone(),
                _ => vec![],
            };
            for k in 1..=100 {
                let t = 0.025 * k as f64;
                // Integrate piecewise between interpolation knots so Simpson stays exact to 1e-8.
                let mut cuts = vec![0.0];
                cuts.extend(knots.iter().copied().filter(|&x| x > 0.0 && x < t));
                cuts.push(t);
                let integral: f64 = cuts
                    .windows(2)
                    .map(|w| simpson(|s| h.density(s).unwrap(), w[0], w[1], 400))
                    .sum();
                assert!((h.survival(t).unwrap() + integral - 1.0).abs() < 1e-8, "{h:?} t={t}");
                let g = h.survival(t).unwrap();
                if g > 1e-6 {
                    let ratio = h.density(t).unwrap() / g;
                    assert!((ratio - h.hazard(t).unwrap()).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn validation() {
        assert!(HazardSpec::constant(-1.0).is_err());
        assert!(HazardSpec::power(1.0, -0.5).is_err());
        assert!(HazardSpec::tabulated(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(HazardSpec::tabulated(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        assert!(HazardSpec::tabulated(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(HazardSpec::none().step_no_jump_prob(0.0, 1).is_err());
        let h = HazardSpec::tabulated(vec![0.0, 2.0], vec![1.0, 3.0]).unwrap();
        assert!((h.domain_max() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn json_forms() {
        let h: HazardSpec = serde_json::from_str(r#"{"kind":"constant","gamma":2.0}"#).unwrap();
        assert_eq!(h, HazardSpec::constant(2.0).unwrap());
        assert_eq!(serde_json::to_string(&h).unwrap(), r#"{"kind":"constant","gamma":2.0}"#);
        let h: HazardSpec =
            serde_json::from_str(r#"{"kind":"tabulated","times":[0,1],"values":[1,2],"domain_max":4}"#).unwrap();
        assert_eq!(h.domain_max(), 4.0);
        let back: HazardSpec = serde_json::from_str(&serde_json::to_string(&h).unwrap()).unwrap();
        assert_eq!(back, h);
        assert!(serde_json::from_str::<HazardSpec>(r#"{"kind":"power","a":1.0}"#).is_err());
        assert!(serde_json::from_str::<HazardSpec>(r#"{"kind":"constant","gamma":-1}"#).is_err());
    }

    #[test]
    fn seeded_determinism_and_ordering() {
        let h = HazardSpec::power(1.0, 0.5).unwrap();
        let a = h.sample_renewal(5.0, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = h.sample_renewal(5.0, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&t| (0.0..=5.0).contains(&t)));
        let r = reverse_times(&a, 5.0);
        assert!(r.windows(2).all(|w| w[0] < w[1]));
    }
}
