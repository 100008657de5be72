mod common;

use std::f64::consts::PI;

use common::*;
use maslov_eta::matkernel::*;
use maslov_eta::{CMat, Error, Tol, Tolerances};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn tol() -> Tol {
    Tol::default()
}

#[test]
fn identity_has_unit_eigenvalues() {
    let e = herm_eig(&identity::<f64>(2), &tol()).unwrap();
    assert_eq!(e.values.len(), 2);
    for v in e.values {
        assert!((v - 1.0).abs() < 1e-14);
    }
}

#[test]
fn pauli_x_eigenvalues() {
    let x = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let e = herm_eig(&x, &tol()).unwrap();
    assert!((e.values[0] + 1.0).abs() < 1e-14);
    assert!((e.values[1] - 1.0).abs() < 1e-14);
}

#[test]
fn herm_eig_rejects_non_hermitian() {
    let m = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    assert!(matches!(herm_eig(&m, &tol()), Err(Error::Precondition(_))));
}

#[test]
fn minus_one_has_phase_pi() {
    let e = unitary_eig(&m1(c(-1.0, 0.0)), &tol()).unwrap();
    assert!((e.values[0] - PI).abs() < 1e-14);
}

#[test]
fn diag_i_minus_i_phases() {
    let u = diag(&[c(0.0, 1.0), c(0.0, -1.0)]);
    let e = unitary_eig(&u, &tol()).unwrap();
    assert!((e.values[0] - PI / 2.0).abs() < 1e-13);
    assert!((e.values[1] - 3.0 * PI / 2.0).abs() < 1e-13);
}

#[test]
fn eigenvalue_one_maps_to_two_pi() {
    assert!((phase_0_2pi(c(1.0, 0.0)) - 2.0 * PI).abs() < 1e-15);
}

#[test]
fn branch_logarithm_values() {
    let l = principal_log_unitary(&m1(c(-1.0, 0.0)), &tol()).unwrap();
    assert!((l[(0, 0)] - c(0.0, PI)).norm() < 1e-14);
    let l = principal_log_unitary(&m1(c(0.0, 1.0)), &tol()).unwrap();
    assert!((l[(0, 0)] - c(0.0, PI / 2.0)).norm() < 1e-14);
    let u = diag(&[c(0.0, 1.0), c(0.0, -1.0)]);
    let l = principal_log_unitary(&u, &tol()).unwrap();
    assert!(max_abs(&(&l - diag(&[c(0.0, PI / 2.0), c(0.0, 1.5 * PI)]))) < 1e-13);
    let back = exp_antihermitian(&l, &tol()).unwrap();
    assert!(max_abs(&(back - u)) < 1e-13);
}

#[test]
fn logarithm_rejects_eigenvalue_at_cut() {
    let u = diag(&[c(1.0, 0.0), c(0.0, 1.0)]);
    assert!(matches!(principal_log_unitary(&u, &tol()), Err(Error::BranchCut { .. })));
}

#[test]
fn positive_projection_examples() {
    let (p, counts) = spectral_projection_pos(&diag(&[c(2.0, 0.0), c(-3.0, 0.0)]), 1e-8, &tol()).unwrap();
    assert!(max_abs(&(p - diag(&[c(1.0, 0.0), c(0.0, 0.0)]))) < 1e-14);
    assert_eq!((counts.n_pos, counts.n_neg, counts.n_zero), (1, 1, 0));

    let (p, counts) = spectral_projection_pos(&CMat::zeros(3, 3), 1e-8, &tol()).unwrap();
    assert_eq!(max_abs(&p), 0.0);
    assert_eq!((counts.n_pos, counts.n_neg, counts.n_zero), (0, 0, 3));

    // a₁ − a₂ = 1 − (−1) for the scalar triple (P(1), P(i), P(−i)).
    let (p, counts) = spectral_projection_pos(&m1(c(2.0, 0.0)), 1e-8, &tol()).unwrap();
    assert!((p[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
    assert_eq!((counts.n_pos, counts.n_neg, counts.n_zero), (1, 0, 0));
}

#[test]
fn invertibility_examples() {
    assert!(is_invertible(&identity::<f64>(3), 1e-10));
    assert!(!is_invertible(&CMat::zeros(2, 2), 1e-10));
    let ps = maslov_eta::lagrangian::ps::<f64>(2);
    let sum = ps.matrix() + ps.complement().matrix();
    assert!(is_invertible(&sum, 1e-10));
}

#[test]
fn single_precision_instantiation() {
    let t = Tolerances::<f32>::default();
    let u = diag(&[num_complex::Complex::new(0.0f32, 1.0), num_complex::Complex::new(-1.0f32, 0.0)]);
    let e = unitary_eig(&u, &t).unwrap();
    assert!((e.values[0] - std::f32::consts::FRAC_PI_2).abs() < 1e-5);
    assert!((e.values[1] - std::f32::consts::PI).abs() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermitian_reconstruction(seed in any::<u64>(), n in 1usize..8) {
        let mut r = rng(seed);
        let h = random_hermitian(&mut r, n);
        let e = herm_eig(&h, &tol()).unwrap();
        let rec = functional_calculus(&e, |x| c(x, 0.0));
        prop_assert!(norm(&(&h - rec)) / norm(&h) < 1e-12);
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(is_unitary(&e.vectors, 1e-12));
    }

    #[test]
    fn unitary_reconstruction(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let u = random_unitary(&mut r, n);
        let e = unitary_eig(&u, &tol()).unwrap();
        let rec = functional_calculus(&e, |t| c(t.cos(), t.sin()));
        prop_assert!(max_abs(&(&u - rec)) < 1e-12);
        prop_assert!(e.values.iter().all(|&t| t > 0.0 && t <= 2.0 * PI));
    }

    #[test]
    fn logarithm_round_trip(seed in any::<u64>(), n in 1usize..6) {
        let mut r = rng(seed);
        let u = random_unitary(&mut r, n);
        let l = principal_log_unitary(&u, &tol()).unwrap();
        prop_assert!(is_hermitian(&(&l * c(0.0, -1.0)), 1e-12));
        let back = exp_antihermitian(&l, &tol()).unwrap();
        prop_assert!(max_abs(&(back - u)) < 1e-11);
    }

    #[test]
    fn spectral_projection_is_projection(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let h = random_hermitian(&mut r, n);
        let (p, counts) = spectral_projection_pos(&h, 1e-8, &tol()).unwrap();
        prop_assert!(is_projection(&p, 1e-10));
        prop_assert!((p.trace().re - counts.n_pos as f64).abs() < 1e-10);
        prop_assert_eq!(counts.n_pos + counts.n_neg + counts.n_zero, n);
    }
}
