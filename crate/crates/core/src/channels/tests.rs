use super::*;
use crate::random;
use crate::tensor::partial_trace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type M = ComplexMatrix<f64>;
type Ch = QuantumChannel<f64>;

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn pauli_x() -> M {
    M::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

fn cnot() -> M {
    let mut m = M::zeros(4, 4);
    for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        m[(r, col)] = c(1.0, 0.0);
    }
    m
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn two_qubits() -> HilbertLayout {
    HilbertLayout::new(vec![2, 2], vec!["S", "M"]).unwrap()
}

#[test]
fn identity_and_unitary_action() {
    let mut r = rng(1);
    let rho = random::state::<f64, _>(3, "S", &mut r);
    assert_eq!(Ch::identity(3).apply(&rho).unwrap().matrix(), rho.matrix());
    let zero = DensityMatrix::<f64>::basis(2, 0, "S").unwrap();
    let flipped = Ch::unitary(&pauli_x()).unwrap().apply(&zero).unwrap();
    assert!(flipped.matrix().distance(&M::unit(2, 1, 1)) < 1e-15);
}

#[test]
fn kraus_and_superop_actions_agree() {
    let mut r = rng(2);
    let ks = random::kraus_family::<f64, _>(3, 4, &mut r);
    let ch = Ch::from_kraus(&ks).unwrap();
    assert!(ch.is_trace_preserving());
    for _ in 0..10 {
        let rho = random::state::<f64, _>(3, "S", &mut r);
        let direct = ks
            .iter()
            .fold(M::zeros(3, 3), |acc, k| acc + rho.matrix().conjugate_by(k));
        assert!(ch.apply(&rho).unwrap().matrix().distance(&direct) < 1e-13);
    }
    // Round trip through the extracted Kraus family.
    let back = Ch::from_kraus(&ch.kraus().unwrap()).unwrap();
    assert!(back.distance(&ch).unwrap() < 1e-12);
    assert!(ch.kraus().unwrap().len() <= 4);
}

#[test]
fn mix_and_compose() {
    let mut r = rng(3);
    let a = Ch::from_kraus(&random::kraus_family::<f64, _>(2, 2, &mut r)).unwrap();
    let b = Ch::unitary(&random::unitary::<f64, _>(2, &mut r)).unwrap();
    assert!(Ch::mix(1.0, &a, &b).unwrap().distance(&a).unwrap() < 1e-15);
    assert!(Ch::mix(0.0, &a, &b).unwrap().distance(&b).unwrap() < 1e-15);
    assert!(matches!(Ch::mix(1.5, &a, &b), Err(Error::InvalidProbability(_))));

    let u = random::unitary::<f64, _>(2, &mut r);
    let back = Ch::unitary(&u).unwrap().compose(&Ch::unitary(&u.adjoint()).unwrap()).unwrap();
    assert!(back.distance(&Ch::identity(2)).unwrap() < 1e-13);

    let flip = Ch::unitary(&pauli_x()).unwrap();
    let id = Ch::identity(2);
    let mixed = Ch::mix(0.3, &id, &flip).unwrap();
    let expect = id.choi().scale_real(0.3) + flip.choi().scale_real(0.7);
    assert!(mixed.choi().distance(&expect) < 1e-15);

    // Composition by superoperator product matches sequential application.
    let ab = a.compose(&b).unwrap();
    let rho = random::state::<f64, _>(2, "S", &mut r);
    let seq = a.apply(&b.apply(&rho).unwrap()).unwrap();
    assert!(ab.apply(&rho).unwrap().matrix().distance(seq.matrix()) < 1e-14);
}

#[test]
fn cpt_certificates() {
    let mut r = rng(4);
    let u = Ch::unitary(&random::unitary::<f64, _>(3, &mut r)).unwrap();
    let rep = u.verify_cpt(1e-10).unwrap();
    assert!(rep.cp && rep.tp);

    let rep = Ch::transpose(2).verify_cpt(1e-10).unwrap();
    assert!(!rep.cp && rep.tp);
    // The Choi matrix of the transpose is the swap, eigenvalues ±1; divided by d_in = 2.
    let eig = crate::tensor::eigvalsh(&Ch::transpose(2).choi()).unwrap();
    assert!((eig[0] + 1.0).abs() < 1e-14);
    assert!((rep.min_choi_eig + 0.5).abs() < 1e-14);

    // No-jump evolution e^{Rt} ρ e^{R†t} for amplitude damping loses trace.
    let gamma = 0.7;
    let lower = M::unit(2, 0, 1);
    let rgen = lower.adjoint().matmul(&lower).scale_real(-0.5 * gamma);
    let e = crate::tensor::matrix_exp(&rgen, c(1.0, 0.0)).unwrap();
    let r_t = Ch::from_kraus(&[e]).unwrap();
    let rep = r_t.verify_cpt(1e-10).unwrap();
    assert!(rep.cp && !rep.tp && rep.tp_residual > 0.1);
    assert!(!r_t.is_trace_preserving());
    assert!(r_t.require_trace_preserving().is_err());
}

#[test]
fn swap_operator_properties() {
    assert_eq!(swap_operator::<f64>(1), M::identity(1));
    let s = swap_operator::<f64>(2);
    assert!(s.matmul(&s).distance(&M::identity(4)) < 1e-15);
    let mut r = rng(5);
    for d in [2, 3] {
        let s = swap_operator::<f64>(d);
        let a = random::state::<f64, _>(d, "A", &mut r);
        let b = random::state::<f64, _>(d, "B", &mut r);
        let swapped = a.matrix().kron(b.matrix()).conjugate_by(&s);
        assert!(swapped.distance(&b.matrix().kron(a.matrix())) < 1e-14);
    }
}

#[test]
fn sec3_collision_cases() {
    let mut r = rng(6);
    assert!(collision_sec3(1.0, 2).unwrap().distance(&Ch::identity(4)).unwrap() < 1e-15);
    let swap = Ch::unitary(&swap_operator(2)).unwrap();
    assert!(collision_sec3(0.0, 2).unwrap().distance(&swap).unwrap() < 1e-15);
    let rho = random::state::<f64, _>(2, "M", &mut r);
    let eta = random::state::<f64, _>(2, "n", &mut r);
    let prod = DensityMatrix::new(rho.matrix().kron(eta.matrix()), two_qubits()).unwrap();
    let out = collision_sec3(0.5, 2).unwrap().apply(&prod).unwrap();
    let expect = rho.matrix().kron(eta.matrix()).scale_real(0.5) + eta.matrix().kron(rho.matrix()).scale_real(0.5);
    assert!(out.matrix().distance(&expect) < 1e-15);
    assert!(collision_sec3(-0.1, 2).is_err());
}

#[test]
fn sec4_collision_cases() {
    let mut r = rng(7);
    let v = random::unitary::<f64, _>(4, &mut r);
    assert!(collision_sec4(1.0, &v, 2).unwrap().distance(&Ch::identity(16)).unwrap() < 1e-14);

    // p = 0, V = I: pure M ↔ n2 exchange.
    let st: Vec<_> = (0..4).map(|_| random::state::<f64, _>(2, "x", &mut r)).collect();
    let joint = |order: [usize; 4]| {
        order
            .iter()
            .fold(M::identity(1), |acc, &k| acc.kron(st[k].matrix()))
    };
    let out = collision_sec4(0.0, &M::identity(4), 2).unwrap().apply_operator(&joint([0, 1, 2, 3])).unwrap();
    assert!(out.distance(&joint([0, 3, 2, 1])) < 1e-14);

    // p = 0, V = CNOT on (S, n1): dense 16x16 conjugation oracle.
    let cn = cnot();
    let mut w = M::zeros(16, 16);
    for s in 0..2 {
        for m in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let (s2, a2) = match (s, a) {
                        (0, x) => (0, x),
                        (_, x) => (1, 1 - x),
                    };
                    // |s m a b⟩ → swap M,n2 → |s b a m⟩ → CNOT(S→n1).
                    w[(s2 * 8 + b * 4 + a2 * 2 + m, s * 8 + m * 4 + a * 2 + b)] = c(1.0, 0.0);
                }
            }
        }
    }
    let sigma = joint([0, 1, 2, 3]);
    let out = collision_sec4(0.0, &cn, 2).unwrap().apply_operator(&sigma).unwrap();
    assert!(out.distance(&sigma.conjugate_by(&w)) < 1e-14);

    let bad = M::identity(4).scale_real(1.1);
    assert!(matches!(collision_sec4(0.5, &bad, 2), Err(Error::NotUnitary { .. })));
    assert!(collision_sec4(2.0, &cn, 2).is_err());
}

#[test]
fn jump_map_cases() {
    let mut r = rng(8);
    let xi = random::state::<f64, _>(2, "n1", &mut r);
    assert!(jump_map_z(&M::identity(4), &xi).unwrap().distance(&Ch::identity(2)).unwrap() < 1e-14);

    let z = jump_map_z(&swap_operator(2), &xi).unwrap();
    for _ in 0..5 {
        let rho = random::state::<f64, _>(2, "S", &mut r);
        assert!(z.apply(&rho).unwrap().matrix().distance(xi.matrix()) < 1e-14);
    }

    // CNOT with ξ = |0⟩⟨0| dephases in the computational basis.
    let zero = DensityMatrix::<f64>::basis(2, 0, "n1").unwrap();
    let z = jump_map_z(&cnot(), &zero).unwrap();
    let dephase = Ch::from_kraus(&[M::unit(2, 0, 0), M::unit(2, 1, 1)]).unwrap();
    assert!(z.distance(&dephase).unwrap() < 1e-14);
    let rho = random::state::<f64, _>(2, "S", &mut r);
    let dense = partial_trace(
        &rho.matrix().kron(zero.matrix()).conjugate_by(&cnot()),
        &two_qubits(),
        &["S"],
    )
    .unwrap();
    assert!(z.apply(&rho).unwrap().matrix().distance(&dense) < 1e-14);
    assert!(jump_map_z(&cnot(), &random::state::<f64, _>(3, "n1", &mut r)).is_err());
}

#[test]
fn ztilde_forms_agree() {
    let mut r = rng(9);
    for d_m in [2, 3] {
        for _ in 0..5 {
            let v = random::unitary::<f64, _>(4, &mut r);
            let xi = random::state::<f64, _>(2, "n1", &mut r);
            let eta = random::state::<f64, _>(d_m, "n2", &mut r);
            let full = ztilde_full(&v, &xi, &eta).unwrap();
            let reduced = ztilde_reduced(&jump_map_z(&v, &xi).unwrap(), &eta).unwrap();
            assert!(full.distance(&reduced).unwrap() < 1e-12);
        }
    }
    // V = I: reset of M only.
    let xi = random::state::<f64, _>(2, "n1", &mut r);
    let eta = random::state::<f64, _>(2, "n2", &mut r);
    let full = ztilde_full(&M::identity(4), &xi, &eta).unwrap();
    let rho = random::density::<f64, _>(&two_qubits(), &mut r).unwrap();
    let expect = partial_trace(rho.matrix(), &two_qubits(), &["S"]).unwrap().kron(eta.matrix());
    assert!(full.apply(&rho).unwrap().matrix().distance(&expect) < 1e-14);

    // Pure η: the M marginal after the jump is exactly η.
    let v = random::unitary::<f64, _>(4, &mut r);
    let eta0 = DensityMatrix::<f64>::basis(2, 0, "n2").unwrap();
    let out = ztilde_full(&v, &xi, &eta0).unwrap().apply(&rho).unwrap();
    let m = partial_trace(out.matrix(), &two_qubits(), &["M"]).unwrap();
    assert!(m.distance(&M::unit(2, 0, 0)) < 1e-14);
}

#[test]
fn corrupted_swap_breaks_the_identity() {
    let mut r = rng(10);
    let v = random::unitary::<f64, _>(4, &mut r);
    let xi = random::state::<f64, _>(2, "n1", &mut r);
    let eta = random::state::<f64, _>(2, "n2", &mut r);
    // Exchange followed by a bit flip on M.
    let bad = pauli_x().kron(&M::identity(2)).matmul(&swap_operator(2));
    let full = ztilde_full_with_swap(&v, &xi, &eta, &bad).unwrap();
    let reduced = ztilde_reduced(&jump_map_z(&v, &xi).unwrap(), &eta).unwrap();
    assert!(full.distance(&reduced).unwrap() > 1e-3);
}

#[test]
fn evolution_maps() {
    let mut r = rng(11);
    let h = random::hermitian::<f64, _>(4, 2.0, &mut r);
    let eta = random::state::<f64, _>(2, "M", &mut r);
    assert!(evolution_map(&h, &eta, 0.0).unwrap().distance(&Ch::identity(2)).unwrap() < 1e-13);

    // Decoupled Hamiltonian: unitary channel on S independent of η.
    let hs = random::hermitian::<f64, _>(2, 1.0, &mut r);
    let hm = random::hermitian::<f64, _>(2, 1.0, &mut r);
    let dec = hs.kron(&M::identity(2)) + M::identity(2).kron(&hm);
    let t = 0.8;
    let us = crate::tensor::unitary_propagator(&hs, t).unwrap();
    let ch = evolution_map(&dec, &eta, t).unwrap();
    assert!(ch.distance(&Ch::unitary(&us).unwrap()).unwrap() < 1e-13);

    // Exchange coupling with a ground-state memory: amplitude reset at t = π/2.
    let xx = pauli_x().kron(&pauli_x());
    let y = M::from_vec(2, 2, vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]).unwrap();
    let hx = (xx + y.kron(&y)).scale_real(0.5);
    let ground = DensityMatrix::<f64>::basis(2, 0, "M").unwrap();
    let ch = evolution_map(&hx, &ground, std::f64::consts::FRAC_PI_2).unwrap();
    let excited = DensityMatrix::<f64>::basis(2, 1, "S").unwrap();
    let out = ch.apply(&excited).unwrap();
    assert!(out.matrix().distance(&M::unit(2, 0, 0)) < 1e-13);
    let rho = random::state::<f64, _>(2, "S", &mut r);
    let u = crate::tensor::unitary_propagator(&hx, std::f64::consts::FRAC_PI_2).unwrap();
    let dense = partial_trace(&rho.matrix().kron(ground.matrix()).conjugate_by(&u), &two_qubits(), &["S"]).unwrap();
    assert!(ch.apply(&rho).unwrap().matrix().distance(&dense) < 1e-13);

    let not_h = M::from_vec(2, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
    assert!(evolution_map(&not_h.kron(&M::identity(2)), &eta, 1.0).is_err());
}

#[test]
fn channel_tensor_product() {
    let mut r = rng(12);
    let a = Ch::from_kraus(&random::kraus_family::<f64, _>(2, 2, &mut r)).unwrap();
    let b = Ch::from_kraus(&random::kraus_family::<f64, _>(3, 2, &mut r)).unwrap();
    let ab = a.tensor(&b).unwrap();
    let x = random::state::<f64, _>(2, "A", &mut r);
    let y = random::state::<f64, _>(3, "B", &mut r);
    let lhs = ab.apply_operator(&x.matrix().kron(y.matrix())).unwrap();
    let rhs = a.apply_operator(x.matrix()).unwrap().kron(&b.apply_operator(y.matrix()).unwrap());
    assert!(lhs.distance(&rhs) < 1e-14);
}

#[test]
fn json_forms() {
    let flip = Ch::unitary(&pauli_x()).unwrap();
    let s = serde_json::to_string(&flip).unwrap();
    assert!(s.starts_with(r#"{"kind":"superop","dims":[2,2],"data":"#));
    let back: Ch = serde_json::from_str(&s).unwrap();
    assert!(back.distance(&flip).unwrap() < 1e-15);
    let kraus = r#"{"kind":"kraus","dims":[2,2],"data":[[[[0,0],[1,0]],[[1,0],[0,0]]]]}"#;
    let k: Ch = serde_json::from_str(kraus).unwrap();
    assert!(k.distance(&flip).unwrap() < 1e-15);
    let bad = r#"{"kind":"kraus","dims":[3,3],"data":[[[[0,0],[1,0]],[[1,0],[0,0]]]]}"#;
    assert!(serde_json::from_str::<Ch>(bad).is_err());
}

#[test]
fn single_precision_channel() {
    let mut r = rng(13);
    let v = random::unitary::<f32, _>(4, &mut r);
    let xi = random::state::<f32, _>(2, "n1", &mut r);
    let z = jump_map_z(&v, &xi).unwrap();
    let rep = z.verify_cpt(1e-4).unwrap();
    assert!(rep.cp && rep.tp);
}
