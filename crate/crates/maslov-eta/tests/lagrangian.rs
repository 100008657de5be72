mod common;

use common::*;
use maslov_eta::lagrangian::*;
use maslov_eta::matkernel::{identity, is_unitary};
use maslov_eta::{CMat, Error, Tol};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn tol() -> Tol {
    Tol::default()
}

fn lag(z: maslov_eta::Complex64) -> maslov_eta::Lagrangian {
    from_unitary(&m1(z), &tol()).unwrap()
}

fn m2(a: [[(f64, f64); 2]; 2]) -> CMat {
    DMatrix::from_fn(2, 2, |i, j| c(a[i][j].0, a[i][j].1))
}

#[test]
fn ps_from_identity() {
    let p = lag(c(1.0, 0.0));
    assert!(max_abs(&(p.matrix() - m2([[(0.5, 0.0), (0.5, 0.0)], [(0.5, 0.0), (0.5, 0.0)]]))) < 1e-15);
}

#[test]
fn minus_one_gives_complement_of_ps() {
    let p = lag(c(-1.0, 0.0));
    assert!(max_abs(&(p.matrix() - ps::<f64>(1).complement().matrix())) < 1e-15);
}

#[test]
fn q1_and_q2_matrices() {
    let q1 = lag(c(0.0, 1.0));
    assert!(max_abs(&(q1.matrix() - m2([[(0.5, 0.0), (0.0, -0.5)], [(0.0, 0.5), (0.5, 0.0)]]))) < 1e-15);
    let q2 = LagrangianProjection::new(m2([[(0.5, 0.0), (0.0, 0.5)], [(0.0, -0.5), (0.5, 0.0)]]), &tol()).unwrap();
    assert!((unitary_of(&q2, &tol()).unwrap()[(0, 0)] - c(0.0, -1.0)).norm() < 1e-15);
    assert!((unitary_of(&ps::<f64>(1), &tol()).unwrap()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn malformed_matrices_are_rejected() {
    assert!(matches!(LagrangianProjection::new(identity::<f64>(2), &tol()), Err(Error::Malformed(_))));
    assert!(matches!(LagrangianProjection::new(identity::<f64>(3), &tol()), Err(Error::Malformed(_))));
    // The projection onto span(e₁) is not Lagrangian for I₀.
    let p = m2([[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (0.0, 0.0)]]);
    assert!(matches!(LagrangianProjection::new(p, &tol()), Err(Error::Malformed(_))));
    assert!(matches!(from_unitary(&m1(c(2.0, 0.0)), &tol()), Err(Error::Precondition(_))));
}

#[test]
fn cayley_examples() {
    let u = |a: f64| unitary_of(&cayley(&m1(c(a, 0.0)), &tol()).unwrap(), &tol()).unwrap()[(0, 0)];
    assert!((u(0.0) - c(-1.0, 0.0)).norm() < 1e-15);
    assert!((u(1.0) - c(0.0, -1.0)).norm() < 1e-15);
    assert!((u(-1.0) - c(0.0, 1.0)).norm() < 1e-15);
}

#[test]
fn transversality_examples() {
    let ps = ps::<f64>(1);
    assert!(is_transverse(&ps, &ps.complement(), &tol()));
    assert!(!is_transverse(&ps, &ps, &tol()));
    assert!(is_transverse(&lag(c(0.0, 1.0)), &lag(c(0.0, -1.0)), &tol()));
}

#[test]
fn standardisation_examples() {
    let w = |a, b| standardize_pair(&lag(a), &lag(b), &tol()).unwrap().w[(0, 0)];
    assert!((w(c(1.0, 0.0), c(-1.0, 0.0)) - c(-1.0, 0.0)).norm() < 1e-15);
    assert!((w(c(0.0, 1.0), c(0.0, -1.0)) - c(-1.0, 0.0)).norm() < 1e-15);
    assert!((w(c(0.0, -1.0), c(1.0, 0.0)) - c(0.0, 1.0)).norm() < 1e-15);
    assert!(matches!(standardize_pair(&lag(c(1.0, 0.0)), &lag(c(1.0, 0.0)), &tol()), Err(Error::Transversality { .. })));
}

#[test]
fn boundary_path_for_w_minus_one_is_constant() {
    let pair = standardize_pair(&ps::<f64>(1), &ps::<f64>(1).complement(), &tol()).unwrap();
    let path = boundary_unitary_path(&pair, &FlatBump::default(), 16, &tol()).unwrap();
    for u in &path {
        assert!(max_abs(&(u - &path[0])) < 1e-14);
    }
}

#[test]
fn boundary_path_moves_q1_to_complement() {
    let p0 = ps::<f64>(1);
    let p1 = lag(c(0.0, 1.0));
    let pair = standardize_pair(&p0, &p1, &tol()).unwrap();
    let path = boundary_unitary_path(&pair, &FlatBump::default(), 32, &tol()).unwrap();
    let start = p0.conjugate(&path[0], &tol()).unwrap();
    assert!(max_abs(&(start.matrix() - p0.matrix())) < 1e-14);
    let end = p1.conjugate(&path[32], &tol()).unwrap();
    assert!(max_abs(&(end.matrix() - p0.complement().matrix())) < 1e-13);
}

#[test]
fn flat_bump_is_flat_at_both_ends() {
    let f = FlatBump::default();
    assert_eq!(f.value(0.1), 0.0);
    assert_eq!(f.value(0.9), 1.0);
    assert!((f.value(0.5) - 0.5).abs() < 1e-15);
    let h = 1e-6;
    for x in [0.3, 0.5, 0.7] {
        let fd = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
        assert!((fd - f.deriv(x)).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitary_round_trip(seed in any::<u64>(), d in 1usize..5) {
        let mut r = rng(seed);
        let u = random_unitary(&mut r, d);
        let p = from_unitary(&u, &tol()).unwrap();
        prop_assert!(max_abs(&(unitary_of(&p, &tol()).unwrap() - &u)) < 1e-13);
        prop_assert!(LagrangianProjection::new(p.matrix().clone(), &tol()).is_ok());
        prop_assert!(is_transverse(&p, &p.complement(), &tol()));
    }

    #[test]
    fn cayley_is_transverse_to_ps(seed in any::<u64>(), d in 1usize..5) {
        let mut r = rng(seed);
        let a = random_hermitian(&mut r, d);
        let p = cayley(&a, &tol()).unwrap();
        prop_assert!(is_transverse(&ps::<f64>(d), &p, &tol()));
    }

    #[test]
    fn standardiser_maps_p0_to_ps(seed in any::<u64>(), d in 1usize..5) {
        let mut r = rng(seed);
        let u0 = random_unitary(&mut r, d);
        let u1 = random_unitary(&mut r, d);
        let (p0, p1) = (from_unitary(&u0, &tol()).unwrap(), from_unitary(&u1, &tol()).unwrap());
        let pair = standardize_pair(&p0, &p1, &tol()).unwrap();
        prop_assert!(is_unitary(&pair.w, 1e-12));
        let q0 = p0.conjugate(&pair.u, &tol()).unwrap();
        prop_assert!(max_abs(&(q0.matrix() - ps::<f64>(d).matrix())) < 1e-12);
        let q1 = p1.conjugate(&pair.u, &tol()).unwrap();
        prop_assert!(max_abs(&(unitary_of(&q1, &tol()).unwrap() - &pair.w)) < 1e-12);
    }
}
