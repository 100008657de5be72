mod common;

use std::f64::consts::PI;

use common::*;
use maslov_eta::families::{bott_field, bott_projection, rotating_bott_field, AxisMap};
use maslov_eta::forms_grid::*;
use maslov_eta::quadrature::{compensated_sum, GaussLegendre};
use maslov_eta::{CMat, Complex64, Error};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn scalar(grid: &BaseGrid, mask: usize, f: impl Fn(&[f64]) -> f64) -> MatrixFormField {
    let v: Vec<Complex64> = (0..grid.len()).map(|k| c(f(&grid.coords(k)), 0.0)).collect();
    MatrixFormField::scalar_component(grid, mask, &v).unwrap()
}

fn random_field(grid: &BaseGrid, mask: usize, m: usize, seed: u64) -> MatrixFormField {
    let mut r = rng(seed);
    let mut f = MatrixFormField::zero(grid, m);
    f.components[mask] = Some((0..grid.len()).map(|_| random_complex(&mut r, m, m)).collect());
    f
}

fn field_diff(a: &MatrixFormField, b: &MatrixFormField) -> f64 {
    a.add(&b.scale(c(-1.0, 0.0))).unwrap().sup_norm()
}

#[test]
fn weights_sum_to_coordinate_measure() {
    for g in [BaseGrid::point(), BaseGrid::circle(17), BaseGrid::torus(8, 13), BaseGrid::sphere_rect(9, 14), BaseGrid::sphere_circle(5, 6, 7)] {
        let s = compensated_sum(g.weights());
        assert!((s - g.measure()).abs() < 1e-12, "{:?}", g.kind);
    }
    let g = BaseGrid::sphere_rect(200, 8);
    assert!((compensated_sum(g.area_weights()) - 4.0 * PI).abs() < 1e-3);
}

#[test]
fn periodic_axes_wrap() {
    let g = BaseGrid::torus(6, 5);
    let k = g.linear(&[0, 4]);
    let st = g.stencil(k, 1);
    assert!(st.iter().any(|&(j, _)| j == g.linear(&[0, 0])));
    assert!(st.iter().any(|&(j, _)| j == g.linear(&[0, 3])));
    assert_eq!(g.multi_index(g.linear(&[3, 2])), vec![3, 2]);
    let s = BaseGrid::sphere_rect(6, 5);
    let st = s.stencil(s.linear(&[0, 0]), 0);
    assert_eq!(st.len(), 3);
}

#[test]
fn grid_construction_errors() {
    assert!(BaseGrid::from_kind(GridKind::Torus, &[8]).is_err());
    assert!(BaseGrid::from_kind(GridKind::Circle, &[2]).is_err());
    assert_eq!(BaseGrid::from_kind(GridKind::SphereRect, &[4, 6]).unwrap(), BaseGrid::sphere_rect(4, 6));
}

#[test]
fn derivative_of_constant_vanishes() {
    let g = BaseGrid::sphere_rect(10, 12);
    let f = MatrixFormField::from_deg0(&g, vec![random_complex(&mut rng(1), 3, 3); g.len()]).unwrap();
    assert!(ext_d(&f).unwrap().sup_norm() < 1e-12);
    assert!(matches!(ext_d(&MatrixFormField::zero(&BaseGrid::point(), 1)), Err(Error::DegreeMismatch(_))));
}

#[test]
fn derivative_of_sine_converges_at_second_order() {
    let err = |n| {
        let g = BaseGrid::circle(n);
        let df = ext_d(&scalar(&g, 0, |x| x[0].sin())).unwrap();
        field_diff(&df, &scalar(&g, 1, |x| x[0].cos()))
    };
    let ratio = err(32) / err(64);
    assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    // one-sided stencils at the ends of a non-periodic axis keep second order
    let err = |n| {
        let g = BaseGrid::sphere_rect(n, 4);
        let df = ext_d(&scalar(&g, 0, |x| x[0].cos())).unwrap();
        field_diff(&df, &scalar(&g, 1, |x| -x[0].sin()))
    };
    let ratio = err(32) / err(64);
    assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
}

#[test]
fn second_derivative_vanishes() {
    // The difference operators along different axes commute exactly, so the
    // discrete d∘d vanishes to rounding on every grid.
    let g = BaseGrid::sphere_circle(9, 10, 11);
    for mask in [0, 1, 2, 4] {
        let f = random_field(&g, mask, 2, mask as u64);
        let dd = ext_d(&ext_d(&f).unwrap()).unwrap();
        assert!(dd.sup_norm() < 1e-9 * f.sup_norm() * 100.0, "mask {mask}: {}", dd.sup_norm());
    }
}

#[test]
fn wedge_examples() {
    let g = BaseGrid::torus(5, 6);
    let a = random_field(&g, 0, 3, 1);
    let b = random_field(&g, 0, 3, 2);
    let ab = wedge(&a, &b).unwrap();
    for k in 0..g.len() {
        let want = &a.component(0).unwrap()[k] * &b.component(0).unwrap()[k];
        assert!(max_abs(&(&ab.component(0).unwrap()[k] - want)) < 1e-12);
    }
    let alpha = scalar(&g, 1, |x| x[0].sin()).add(&scalar(&g, 2, |x| x[1].cos())).unwrap();
    assert!(wedge(&alpha, &alpha).unwrap().sup_norm() < 1e-15);
}

#[test]
fn graded_trace_identity() {
    let g = BaseGrid::torus(4, 5);
    let a = random_field(&g, 1, 3, 3).add(&random_field(&g, 2, 3, 4)).unwrap();
    let b = random_field(&g, 1, 3, 5).add(&random_field(&g, 2, 3, 6)).unwrap();
    let ab = trace_field(&wedge(&a, &b).unwrap());
    let ba = trace_field(&wedge(&b, &a).unwrap());
    assert!(ab.add(&ba).unwrap().sup_norm() < 1e-12);
}

#[test]
fn wedge_is_associative() {
    let g = BaseGrid::sphere_circle(3, 4, 3);
    let f = |s| random_field(&g, 0, 2, s).add(&random_field(&g, 1, 2, s + 10)).unwrap().add(&random_field(&g, 6, 2, s + 20)).unwrap();
    let (a, b, cc) = (f(1), f(2), f(3));
    let l = wedge(&wedge(&a, &b).unwrap(), &cc).unwrap();
    let r = wedge(&a, &wedge(&b, &cc).unwrap()).unwrap();
    assert!(field_diff(&l, &r) < 1e-12);
}

#[test]
fn integration_examples() {
    let g = BaseGrid::torus(16, 16);
    let one = scalar(&g, 3, |_| 1.0);
    assert!((integrate(&one, 2).unwrap() - c(4.0 * PI * PI, 0.0)).norm() < 1e-12);
    let g = BaseGrid::circle(64);
    let s2 = scalar(&g, 1, |x| x[0].sin().powi(2));
    assert!((integrate(&s2, 1).unwrap() - c(PI, 0.0)).norm() < 1e-12);
    assert!(matches!(integrate(&s2, 0), Err(Error::DegreeMismatch(_))));
    // the trace of a commutator field integrates to zero
    let g = BaseGrid::torus(6, 6);
    let (a, b) = (random_field(&g, 0, 4, 7), random_field(&g, 3, 4, 8));
    let comm = wedge(&a, &b).unwrap().add(&wedge(&b, &a).unwrap().scale(c(-1.0, 0.0))).unwrap();
    assert!(integrate(&comm, 2).unwrap().norm() < 1e-12);
}

#[test]
fn chern_character_of_constant_projection() {
    let g = BaseGrid::torus(6, 7);
    let mut p = DMatrix::zeros(4, 4);
    p[(0, 0)] = c(1.0, 0.0);
    p[(2, 2)] = c(1.0, 0.0);
    let u = random_unitary(&mut rng(9), 4);
    let p: CMat = &u * p * u.adjoint();
    let ch = chern_character(&MatrixFormField::from_deg0(&g, vec![p; g.len()]).unwrap(), 1e-10).unwrap();
    assert!(ch.scalar_values(0).iter().all(|z| (z - c(2.0, 0.0)).norm() < 1e-12));
    assert!(ch.sup_norm_degree(2) < 1e-12);
}

#[test]
fn chern_character_rejects_non_projections() {
    let g = BaseGrid::torus(3, 3);
    let mut vals = vec![bott_projection([0.0, 0.0, 1.0]); g.len()];
    vals[4] = random_hermitian(&mut rng(2), 2);
    let f = MatrixFormField::from_deg0(&g, vals).unwrap();
    match chern_character(&f, 1e-10) {
        Err(Error::Precondition(m)) => assert!(m.contains("[1, 1]"), "{m}"),
        other => panic!("{other:?}"),
    }
}

/// Independent value of `−∫ tr q (dq)²` for `q = ½(1 + n·σ)`: Gauss–Legendre
/// in φ, trapezoid in ψ, fourth-order central differences of the axis map
/// and explicit Pauli matrices.
fn bott_ch_oracle(map: &AxisMap) -> Complex64 {
    let (phis, wphi) = GaussLegendre::new(16).composite(0.0, PI, 24);
    let n_psi = 512;
    let h = 1e-3;
    let q = |p: f64, s: f64| bott_projection(map.eval(p, s).unwrap());
    let d4 = |f: &dyn Fn(f64) -> CMat, x: f64| (f(x - 2.0 * h) - f(x - h) * c(8.0, 0.0) + f(x + h) * c(8.0, 0.0) - f(x + 2.0 * h)) / c(12.0 * h, 0.0);
    let mut terms = Vec::new();
    for (&p, &wp) in phis.iter().zip(&wphi) {
        for j in 0..n_psi {
            let s = 2.0 * PI * j as f64 / n_psi as f64;
            let qp = d4(&|x| q(x, s), p);
            let qs = d4(&|x| q(p, x), s);
            let v = (q(p, s) * (&qp * &qs - &qs * &qp)).trace();
            terms.push(-v * (wp * 2.0 * PI / n_psi as f64));
        }
    }
    c(compensated_sum(terms.iter().map(|z| z.re)), compensated_sum(terms.iter().map(|z| z.im)))
}

#[test]
fn bott_chern_integral_matches_dense_oracle() {
    let round = AxisMap::round(1);
    let oracle = bott_ch_oracle(&round);
    let c_b = c(0.0, -2.0 * PI);
    assert!((oracle - c_b).norm() < 1e-6, "oracle {oracle}");
    let ch_int = |map: &AxisMap, n| {
        let g = BaseGrid::sphere_rect(n, n);
        let q = MatrixFormField::from_deg0(&g, bott_field(&g, map).unwrap()).unwrap();
        integrate(&chern_character(&q, 1e-10).unwrap(), 2).unwrap()
    };
    let (e32, e64) = ((ch_int(&round, 32) - c_b).norm(), (ch_int(&round, 64) - c_b).norm());
    assert!(e64 / c_b.norm() < 5e-3, "grid 64 deviation {e64}");
    assert!(e32 / e64 > 3.5, "refinement ratio {}", e32 / e64);
    // perturbed map and degree two
    let pert = AxisMap::perturbed(1, 0.4, 3, 11);
    let o = bott_ch_oracle(&pert);
    assert!((o - c_b).norm() < 1e-5, "perturbed oracle {o}");
    assert!((ch_int(&pert, 64) - o).norm() / o.norm() < 5e-3);
    let two = AxisMap::round(2);
    assert!((bott_ch_oracle(&two) - c_b * c(2.0, 0.0)).norm() < 1e-5);
    let (e32, e64) = ((ch_int(&two, 32) - c_b * c(2.0, 0.0)).norm(), (ch_int(&two, 64) - c_b * c(2.0, 0.0)).norm());
    assert!(e64 / (2.0 * c_b.norm()) < 1e-2 && e32 / e64 > 3.5, "degree two: {e32:e}, {e64:e}");
}

#[test]
fn complementary_chern_character_nodewise() {
    let g = BaseGrid::sphere_rect(12, 16);
    let q = bott_field(&g, &AxisMap::perturbed(1, 0.3, 2, 5)).unwrap();
    let one = DMatrix::<Complex64>::identity(2, 2);
    let qc: Vec<CMat> = q.iter().map(|q| &one - q).collect();
    let ch_c = chern_character(&MatrixFormField::from_deg0(&g, qc.clone()).unwrap(), 1e-10).unwrap();
    let dq = ext_d(&MatrixFormField::from_deg0(&g, q.clone()).unwrap()).unwrap();
    let want = trace_field(&left_multiply(&qc, &wedge(&dq, &dq).unwrap())).scale(c(-1.0, 0.0));
    let (a, b) = (ch_c.scalar_values(3), want.scalar_values(3));
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-10));
    // ch(q) + ch(1 − q) has no degree-2 part
    let ch = chern_character(&MatrixFormField::from_deg0(&g, q).unwrap(), 1e-10).unwrap();
    assert!(ch.add(&ch_c).unwrap().sup_norm_degree(2) < 1e-10);
}

#[test]
fn chern_character_is_closed_at_second_order() {
    let err = |n| {
        let g = BaseGrid::sphere_circle(n, n, n);
        let q = rotating_bott_field(&g, &AxisMap::round(1), 0.5).unwrap();
        let ch = chern_character(&MatrixFormField::from_deg0(&g, q).unwrap(), 1e-10).unwrap();
        ext_d(&ch).unwrap().sup_norm_degree(3)
    };
    let (e1, e2) = (err(16), err(32));
    let ratio = e1 / e2;
    assert!(ratio > 3.0, "closedness defects {e1:e}, {e2:e}");
}

#[test]
fn chern_integral_is_homotopy_invariant() {
    let g = BaseGrid::sphere_rect(64, 64);
    let int = |s: f64| {
        let q = bott_field(&g, &AxisMap::perturbed(1, s, 4, 3)).unwrap();
        integrate(&chern_character(&MatrixFormField::from_deg0(&g, q).unwrap(), 1e-10).unwrap(), 2).unwrap()
    };
    let base = int(0.0);
    for s in [0.2, 0.4, 0.6] {
        assert!((int(s) - base).norm() / base.norm() < 5e-3, "strength {s}");
    }
}

#[test]
fn snapshot_round_trip() {
    let g = BaseGrid::torus(3, 4);
    let f = random_field(&g, 0, 2, 1).add(&random_field(&g, 3, 2, 2)).unwrap();
    let s = f.snapshot();
    assert_eq!(s.components.iter().map(|c| c.indices.clone()).collect::<Vec<_>>(), vec![vec![], vec![0, 1]]);
    let json = serde_json::to_string(&s).unwrap();
    let back = MatrixFormField::from_snapshot(&serde_json::from_str(&json).unwrap()).unwrap();
    assert_eq!(back, f);
    let bytes = f.to_le_bytes();
    assert_eq!(bytes.len(), 2 * g.len() * 4 * 16);
    let z = f.component(0).unwrap()[0][(0, 0)];
    assert_eq!(f64::from_le_bytes(bytes[0..8].try_into().unwrap()), z.re);
    assert_eq!(f64::from_le_bytes(bytes[8..16].try_into().unwrap()), z.im);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exterior_derivative_is_a_graded_derivation(seed in any::<u64>()) {
        // d(f g) = df g + f dg exactly at the level of analytic functions; on
        // the grid the defect is O(h²), so compare with smooth scalar fields.
        let g = BaseGrid::torus(64, 64);
        let a = (seed % 3 + 1) as f64;
        let f = scalar(&g, 0, |x| (a * x[0]).sin() + x[1].cos());
        let h = scalar(&g, 0, |x| (x[0] + a * x[1]).cos());
        let lhs = ext_d(&wedge(&f, &h).unwrap()).unwrap();
        let rhs = wedge(&ext_d(&f).unwrap(), &h).unwrap().add(&wedge(&f, &ext_d(&h).unwrap()).unwrap()).unwrap();
        prop_assert!(field_diff(&lhs, &rhs) < 0.05);
    }

    #[test]
    fn wedge_of_one_forms_anticommutes_for_scalars(seed in any::<u64>()) {
        let g = BaseGrid::torus(4, 4);
        let a = random_field(&g, 1, 1, seed).add(&random_field(&g, 2, 1, seed ^ 1)).unwrap();
        let b = random_field(&g, 1, 1, seed ^ 2).add(&random_field(&g, 2, 1, seed ^ 3)).unwrap();
        let s = wedge(&a, &b).unwrap().add(&wedge(&b, &a).unwrap()).unwrap();
        prop_assert!(s.sup_norm() < 1e-12);
    }
}
