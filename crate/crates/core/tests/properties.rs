mod common;

use common::*;
use num_complex::Complex;
use piecewise_cm::channels::{
    collision_sec3, collision_sec4, evolution_map, jump_map_z, ztilde_full, ztilde_reduced,
    QuantumChannel,
};
use piecewise_cm::engines::{run_generalized_cm_age, run_memory_cm_sec3, AgeEngineOptions, Sec3Options};
use piecewise_cm::evaluators::{
    dyson_markovian, lindblad_evolve, volterra_piecewise, volterra_piecewise_with, JumpOperator, LindbladSpec,
    MapFamily, PiecewiseSpec, VolterraOptions, WeightOrdering,
};
use piecewise_cm::random;
use piecewise_cm::renewal::HazardSpec;
use piecewise_cm::tensor::{
    eigvalsh, matrix_exp, partial_trace, psd_check, trace_distance_matrices, DensityMatrix, HilbertLayout,
};
use proptest::prelude::*;

/// Hazards whose density is smooth on the grid: power exponents are 0 or ≥ 1
/// (for 0 < b < 1 the trapezoid rule is only O(h^{1+b}) at the origin).
fn smooth_hazard(kind: u8, x: f64, y: f64) -> HazardSpec {
    match kind % 3 {
        1 if y < 0.25 => HazardSpec::power(0.2 + 2.0 * x, 0.0).unwrap(),
        1 => HazardSpec::power(0.2 + 2.0 * x, 1.0 + 2.0 * y).unwrap(),
        _ => hazard_from(kind, x, y),
    }
}

fn hazard_from(kind: u8, x: f64, y: f64) -> HazardSpec {
    match kind % 3 {
        0 => HazardSpec::constant(0.2 + 2.0 * x).unwrap(),
        1 => HazardSpec::power(0.2 + 2.0 * x, 3.0 * y).unwrap(),
        _ => HazardSpec::tabulated(vec![0.0, 0.5 + x, 2.0 + y, 4.0], vec![0.3, 2.0 * y, 1.0 + x, 0.5]).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partial_trace_preserves_trace(seed in any::<u64>(), dims in prop::collection::vec(1usize..=2, 1..=4), keep_mask in 0u8..16) {
        let mut r = rng(seed);
        let labels: Vec<String> = (0..dims.len()).map(|i| format!("f{i}")).collect();
        let layout = HilbertLayout::new(dims.clone(), labels.iter().map(String::as_str).collect()).unwrap();
        let m = random::ginibre::<f64, _>(layout.total_dim(), layout.total_dim(), &mut r);
        let keep: Vec<&str> = labels.iter().enumerate().filter(|(i, _)| keep_mask & (1 << i) != 0).map(|(_, l)| l.as_str()).collect();
        let reduced = partial_trace(&m, &layout, &keep).unwrap();
        prop_assert!((reduced.trace() - m.trace()).norm() < 1e-12);
    }

    #[test]
    fn kron_is_associative(seed in any::<u64>(), da in 1usize..=3, db in 1usize..=3, dc in 1usize..=3) {
        let mut r = rng(seed);
        let a = random::ginibre::<f64, _>(da, da, &mut r);
        let b = random::ginibre::<f64, _>(db, db + 1, &mut r);
        let c = random::ginibre::<f64, _>(dc + 1, dc, &mut r);
        prop_assert!(a.kron(&b).kron(&c).distance_max(&a.kron(&b.kron(&c))) < 1e-14);
    }

    #[test]
    fn exponential_inverts(seed in any::<u64>(), d in 1usize..=6, s_re in -1.0f64..1.0, s_im in -1.0f64..1.0) {
        let mut r = rng(seed);
        let m = random::hermitian::<f64, _>(d, 5.0, &mut r);
        let s = Complex::new(s_re, s_im);
        let prod = matrix_exp(&m, s).unwrap().matmul(&matrix_exp(&m, -s).unwrap());
        prop_assert!(prod.distance(&M::identity(d)) < 1e-10);
    }

    #[test]
    fn trace_distance_is_a_metric(seed in any::<u64>(), d in 2usize..=4) {
        let mut r = rng(seed);
        let s: Vec<M> = (0..3).map(|_| random::state::<f64, _>(d, "S", &mut r).into_matrix()).collect();
        let td = |a: &M, b: &M| trace_distance_matrices(a, b).unwrap();
        prop_assert!((td(&s[0], &s[1]) - td(&s[1], &s[0])).abs() < 1e-12);
        prop_assert!(td(&s[0], &s[1]) >= 0.0);
        prop_assert!(td(&s[0], &s[2]) <= td(&s[0], &s[1]) + td(&s[1], &s[2]) + 1e-12);
    }

    #[test]
    fn constructed_channels_are_cpt(seed in any::<u64>(), p in 0.0f64..=1.0, t in 0.0f64..3.0) {
        let mut r = rng(seed);
        let v = random::unitary::<f64, _>(4, &mut r);
        let xi = random::state::<f64, _>(2, "n1", &mut r);
        let eta = random::state::<f64, _>(2, "n2", &mut r);
        let h = random::hermitian::<f64, _>(4, 2.0, &mut r);
        let z = jump_map_z(&v, &xi).unwrap();
        for ch in [
            collision_sec3(p, 2).unwrap(),
            collision_sec4(p, &v, 2).unwrap(),
            z.clone(),
            ztilde_full(&v, &xi, &eta).unwrap(),
            ztilde_reduced(&z, &eta).unwrap(),
            evolution_map(&h, &eta, t).unwrap(),
        ] {
            prop_assert!(ch.verify_cpt(1e-10).unwrap().is_cpt(), "{:?}", ch.label());
        }
    }

    #[test]
    fn bipartite_jump_superoperators_agree(seed in any::<u64>(), d_m in 2usize..=3) {
        let mut r = rng(seed);
        let v = random::unitary::<f64, _>(4, &mut r);
        let xi = random::state::<f64, _>(2, "n1", &mut r);
        let eta = random::state::<f64, _>(d_m, "n2", &mut r);
        let full = ztilde_full(&v, &xi, &eta).unwrap();
        let reduced = ztilde_reduced(&jump_map_z(&v, &xi).unwrap(), &eta).unwrap();
        prop_assert!(full.superop().distance_max(reduced.superop()) < 1e-12);
    }

    #[test]
    fn composition_matches_sequential_application(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = QuantumChannel::from_kraus(&random::kraus_family::<f64, _>(2, 3, &mut r)).unwrap();
        let b = QuantumChannel::from_kraus(&random::kraus_family::<f64, _>(2, 2, &mut r)).unwrap();
        let rho = random::state::<f64, _>(2, "S", &mut r);
        let composed = a.compose(&b).unwrap();
        let seq = a.apply_operator(&b.apply_operator(rho.matrix()).unwrap()).unwrap();
        prop_assert!(composed.apply_operator(rho.matrix()).unwrap().distance_max(&seq) < 1e-12);
        let back = QuantumChannel::from_choi(2, 2, &composed.choi()).unwrap();
        prop_assert!(back.superop().distance_max(composed.superop()) < 1e-12);
    }

    #[test]
    fn hazard_normalization_and_reconstruction(kind in 0u8..3, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let hz = hazard_from(kind, x, y);
        let f = |t: f64| hz.density(t).unwrap();
        let mut integral = 0.0;
        for k in 1..=100 {
            let (a, t) = (0.03 * (k - 1) as f64, 0.03 * k as f64);
            integral += adaptive_simpson(&f, a, t, 1e-13);
            let g = hz.survival(t).unwrap();
            prop_assert!((integral + g - 1.0).abs() < 1e-8, "t={}", t);
            if g > 1e-6 {
                prop_assert!((f(t) / g - hz.hazard(t).unwrap()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn schedule_telescopes(kind in 0u8..3, x in 0.0f64..1.0, y in 0.0f64..1.0, tau in 0.005f64..0.04) {
        let hz = hazard_from(kind, x, y);
        let tau = tau.min(hz.domain_max() / 100.0);
        let sched = hz.schedule(tau, 100).unwrap();
        let mut prod = 1.0;
        for a in 0..100 {
            let p = sched.p(a);
            prop_assert!((0.0..=1.0).contains(&p));
            prod *= p;
            prop_assert!((prod - hz.survival((a + 1) as f64 * tau).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn age_engine_states_stay_physical(seed in any::<u64>(), kind in 0u8..3, x in 0.0f64..1.0, y in 0.0f64..1.0, n in 1usize..=12) {
        let config = random::cm_config(2, 2, 2.0, hazard_from(kind, x, y), 0.2, n, &mut rng(seed));
        let run = run_generalized_cm_age(&config, AgeEngineOptions::default()).unwrap();
        for (s, w) in run.ensemble.states.iter().zip(&run.jump_count_weights) {
            prop_assert!((s.trace().re - 1.0).abs() <= 1e-12);
            prop_assert!(psd_check(&s.hermitian_part(), 1e-10).unwrap().is_psd);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_jump_with_constant_rate_is_the_memory_model(seed in any::<u64>(), gamma in 0.1f64..3.0, n in 1usize..=10) {
        let mut config = random::cm_config(2, 2, 2.0, HazardSpec::constant(gamma).unwrap(), 0.2, n, &mut rng(seed));
        config.v = M::identity(4);
        let age = run_generalized_cm_age(&config, AgeEngineOptions::exact()).unwrap();
        let sec3 = run_memory_cm_sec3(&config, Sec3Options { insert_jump_map: false }).unwrap();
        for (a, b) in age.ensemble.states.iter().zip(&sec3.states) {
            prop_assert!(a.distance_max(b) < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn volterra_trace_and_positivity(seed in any::<u64>(), kind in 0u8..3, x in 0.0f64..1.0, y in 0.0f64..1.0, ordering in prop::bool::ANY) {
        let config = random::cm_config(2, 2, 2.0, smooth_hazard(kind, x, y), 0.1, 10, &mut rng(seed));
        let ordering = if ordering { WeightOrdering::Renewal } else { WeightOrdering::AsWritten };
        let spec = PiecewiseSpec::from_config(&config, 1.5, 60, ordering).unwrap();
        let out = volterra_piecewise(&spec, &config.rho0).unwrap();
        let h = spec.step();
        for (m, tr) in out.raw_states.iter().zip(&out.raw_traces) {
            prop_assert!((tr - 1.0).abs() <= 10.0 * h * h, "trace {}", tr);
            prop_assert!(eigvalsh(&m.hermitian_part()).unwrap()[0] >= -1e-10);
        }
    }

    #[test]
    fn two_jump_truncation_matches_nested_trapezoid(seed in any::<u64>(), kind in 0u8..3, x in 0.0f64..1.0, y in 0.0f64..1.0, ordering in prop::bool::ANY) {
        let config = random::cm_config(2, 2, 2.0, hazard_from(kind, x, y), 0.1, 10, &mut rng(seed));
        let ordering = if ordering { WeightOrdering::Renewal } else { WeightOrdering::AsWritten };
        let spec = PiecewiseSpec::from_config(&config, 1.2, 12, ordering).unwrap();
        let out = volterra_piecewise_with(&spec, &config.rho0, VolterraOptions { max_jumps: Some(2) }).unwrap();
        let t: Vec<f64> = spec.times();
        let sup = |env: &DensityMatrix<f64>| -> Vec<M> {
            t.iter().map(|&s| evolution_map(&config.h_sm, env, s).unwrap().superop().clone()).collect()
        };
        let (before, after) = (sup(&config.eta_bar), sup(&config.eta));
        for k in [0, 1, 6, 12] {
            let oracle = nested_trapezoid_up_to_two(&spec, &before, &after, config.rho0.matrix(), k);
            prop_assert!(out.raw_states[k].distance_max(&oracle) < 1e-8, "k={}", k);
        }
    }
}

#[test]
fn dyson_truncation_remainder_decreases() {
    let spec = LindbladSpec::new(
        M::zeros(2, 2),
        vec![JumpOperator {
            rate: 1.0,
            op: M::unit(2, 0, 1),
        }],
    )
    .unwrap();
    let rho0 = DensityMatrix::basis(2, 1, "S").unwrap();
    let exact = lindblad_evolve(&spec, &rho0, 1.0).unwrap();
    let mut prev = f64::INFINITY;
    for j in 0..=6 {
        let d = dyson_markovian(&spec, &rho0, 1.0, j, 200).unwrap();
        let remainder = 1.0 - d.trace();
        assert!(remainder <= prev + 1e-15, "j={j}");
        prev = remainder;
        if j == 6 {
            assert!(exact.matrix().distance(&d.state) < 1e-3);
        }
    }
}

#[test]
fn unitary_family_matches_unitary_channel() {
    let h = random::hermitian::<f64, _>(2, 1.0, &mut rng(3));
    let fam = MapFamily::Unitary { h: h.clone() }.prepare().unwrap();
    let u = piecewise_cm::tensor::unitary_propagator(&h, 0.7).unwrap();
    let direct = QuantumChannel::unitary(&u).unwrap();
    assert!(fam.superop(0.7).unwrap().distance_max(direct.superop()) < 1e-13);
}
