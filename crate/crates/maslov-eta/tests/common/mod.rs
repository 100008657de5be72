//! Shared helpers for the integration tests: seeded random matrices and
//! small-matrix constructors.

#![allow(dead_code)]

use maslov_eta::{CMat, Complex64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod dense;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn m1(z: Complex64) -> CMat {
    DMatrix::from_element(1, 1, z)
}

pub fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u: f64 = r.gen_range(1e-300..1.0);
    let v: f64 = r.gen_range(0.0..1.0);
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn random_complex(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    DMatrix::from_fn(rows, cols, |_, _| c(gaussian(r), gaussian(r)))
}

pub fn random_hermitian(r: &mut ChaCha8Rng, n: usize) -> CMat {
    let a = random_complex(r, n, n);
    (&a + a.adjoint()) * c(0.5, 0.0)
}

/// Haar-distributed unitary (QR of a complex Ginibre matrix with the phase
/// of the diagonal of R removed).
pub fn random_unitary(r: &mut ChaCha8Rng, n: usize) -> CMat {
    let a = random_complex(r, n, n);
    let qr = a.qr();
    let (q, rr) = (qr.q(), qr.r());
    let ph: Vec<Complex64> = (0..n).map(|i| rr[(i, i)] / rr[(i, i)].norm()).collect();
    DMatrix::from_fn(n, n, |i, j| q[(i, j)] * ph[j])
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
