mod common;

use std::f64::consts::PI;

use common::*;
use maslov_eta::families::*;
use maslov_eta::forms_grid::BaseGrid;
use maslov_eta::matkernel::{is_projection, is_unitary};
use maslov_eta::{Error, Tol};
use proptest::prelude::*;

fn tol() -> Tol {
    Tol::default()
}

#[test]
fn scalar_triple_over_a_point() {
    let f = scalar_triple([c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)], &tol()).unwrap();
    assert_eq!(f.grid.len(), 1);
    assert_eq!(f.d(), 1);
    assert_eq!(f.node_indices(), vec![Vec::<usize>::new()]);
    f.validate(&tol()).unwrap();
    assert!(matches!(scalar_triple([c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 0.0)], &tol()), Err(Error::Malformed(_))));
    let bad = scalar_triple([c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0)], &tol()).unwrap();
    assert!(matches!(bad.validate(&tol()), Err(Error::Transversality { i: 1, j: 2, .. })));
}

#[test]
fn pairs_follow_the_cyclic_order() {
    let f = scalar_triple([c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)], &tol()).unwrap();
    assert_eq!(CYCLIC_PAIRS, [(0, 1), (1, 2), (2, 0)]);
    let p = f.pair(2, 0);
    assert_eq!(p.p0, f.blocks[2]);
    assert_eq!(p.p1, f.blocks[0]);
    assert_eq!(f.projections(&tol()).unwrap().len(), 1);
}

#[test]
fn family_shape_and_unitarity_errors() {
    let g = BaseGrid::circle(4);
    let u = random_unitary(&mut rng(1), 2);
    let short = [vec![u.clone(); 4], vec![u.clone(); 3], vec![u.clone(); 4]];
    assert!(matches!(TripleFamily::new(g.clone(), short, &tol()), Err(Error::Precondition(_))));
    let mut blocks = [vec![u.clone(); 4], vec![u.clone(); 4], vec![u.clone(); 4]];
    blocks[1][2] = random_hermitian(&mut rng(2), 2);
    match TripleFamily::new(g, blocks, &tol()) {
        Err(Error::Malformed(m)) => assert!(m.contains("[2]"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn bott_projection_is_a_rank_one_projection() {
    for n in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.6, 0.0, 0.8]] {
        let q = bott_projection(n);
        assert!(is_projection(&q, 1e-12));
        assert!((q.trace() - c(1.0, 0.0)).norm() < 1e-15);
    }
    let [_, _, s3] = pauli();
    let q = bott_projection([0.0, 0.0, 1.0]);
    assert!(max_abs(&(&s3 * &q - &q)) < 1e-15);
}

#[test]
fn axis_map_values() {
    let m = AxisMap::round(1);
    let n = m.eval(PI / 2.0, 0.0).unwrap();
    assert!((n[0] - 1.0).abs() < 1e-15 && n[1].abs() < 1e-15 && n[2].abs() < 1e-15);
    let n = AxisMap::round(2).eval(PI / 2.0, PI / 4.0).unwrap();
    assert!((n[1] - 1.0).abs() < 1e-15);
    let p = AxisMap::perturbed(1, 0.5, 3, 7);
    assert_eq!(p, AxisMap::perturbed(1, 0.5, 3, 7));
    assert_ne!(p, AxisMap::perturbed(1, 0.5, 3, 8));
    for (phi, psi) in [(0.1, 0.2), (1.0, 3.0), (3.0, 6.0)] {
        let n = p.eval(phi, psi).unwrap();
        assert!((n.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
    }
    // the perturbed map is continuous at the poles
    let a = p.eval(1e-9, 0.0).unwrap();
    let b = p.eval(1e-9, 2.0).unwrap();
    assert!((0..3).all(|i| (a[i] - b[i]).abs() < 1e-7));
    let degenerate = AxisMap {
        degree: 1,
        strength: 1.0,
        terms: vec![PerturbationTerm { a: [0.0, 0.0, -1.0], omega: [0.0, 0.0, 0.0], beta: PI / 2.0 }],
    };
    assert!(matches!(degenerate.eval(0.0, 0.0), Err(Error::Precondition(_))));
}

#[test]
fn bott_triple_blocks() {
    let g = BaseGrid::sphere_rect(6, 8);
    let f = bott_triple(g.clone(), &AxisMap::round(1), &tol()).unwrap();
    f.validate(&tol()).unwrap();
    let q = bott_field(&g, &AxisMap::round(1)).unwrap();
    let one = maslov_eta::matkernel::identity::<f64>(2);
    for k in 0..g.len() {
        assert_eq!(f.blocks[0][k], one);
        let want = (&q[k] * c(2.0, 0.0) - &one) * c(0.0, 1.0);
        assert!(max_abs(&(&f.blocks[1][k] - &want)) < 1e-15);
        assert!(max_abs(&(&f.blocks[2][k] + &want)) < 1e-15);
        assert!(is_unitary(&f.blocks[1][k], 1e-12));
    }
    assert!(matches!(bott_field(&BaseGrid::torus(4, 4), &AxisMap::round(1)), Err(Error::Precondition(_))));
    assert!(rotating_bott_field(&BaseGrid::sphere_rect(4, 4), &AxisMap::round(1), 0.3).is_err());
    let rot = rotating_bott_field(&BaseGrid::sphere_circle(4, 5, 6), &AxisMap::round(1), 0.3).unwrap();
    assert!(rot.iter().all(|q| is_projection(q, 1e-12)));
}

#[test]
fn winding_triple_blocks_and_errors() {
    let g = BaseGrid::torus(6, 5);
    let phases = [vec![0.4, 2.0], vec![1.7, 3.5], vec![4.1, 5.6]];
    let w = vec![vec![1, 0], vec![-1, 2]];
    let f = winding_triple(g.clone(), phases.clone(), &w, &tol()).unwrap();
    let k = g.linear(&[2, 3]);
    let b = g.coords(k);
    let want = c(0.0, 1.7 - b[0] + 2.0 * b[1]).exp();
    assert!((f.blocks[1][k][(1, 0)]).norm() < 1e-15);
    assert!((f.blocks[1][k][(0, 0)] - c(0.0, 1.7 + b[0]).exp()).norm() < 1e-13);
    assert!((f.blocks[1][k][(1, 1)] - c(0.0, 3.5).exp() * (want / c(0.0, 1.7).exp())).norm() < 1e-13);
    assert!(winding_triple(BaseGrid::sphere_rect(4, 4), phases.clone(), &w, &tol()).is_err());
    assert!(winding_triple(g.clone(), phases.clone(), &[vec![1, 0]], &tol()).is_err());
    assert!(winding_triple(g.clone(), phases, &[vec![1], vec![2]], &tol()).is_err());
    let same = [vec![0.4], vec![0.4], vec![2.0]];
    match winding_triple(BaseGrid::circle(5), same, &[vec![3]], &tol()) {
        Err(Error::Transversality { i: 0, j: 1, node }) => assert_eq!(node, Some(vec![0])),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_families_repeat_their_blocks(seed in any::<u64>(), n in 3usize..6, d in 1usize..4) {
        let mut r = rng(seed);
        let u = [random_unitary(&mut r, d), random_unitary(&mut r, d), random_unitary(&mut r, d)];
        let f = constant_triple(BaseGrid::torus(n, n + 1), u.clone(), &tol()).unwrap();
        prop_assert_eq!(f.grid.len(), n * (n + 1));
        for i in 0..3 {
            prop_assert!(f.blocks[i].iter().all(|m| *m == u[i]));
        }
    }

    #[test]
    fn perturbed_axis_is_unit(seed in any::<u64>(), phi in 0.0..PI, psi in 0.0..2.0 * PI, s in 0.0..0.9f64) {
        let n = AxisMap::perturbed(1, s, 3, seed).eval(phi, psi).unwrap();
        prop_assert!((n.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
