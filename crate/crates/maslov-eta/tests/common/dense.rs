//! Dense reference evaluation of the two-insertion term.
//!
//! The Grassmann generators `db^φ, db^ψ` are realised by Jordan–Wigner
//! creation operators `e₁ = c ⊗ 1`, `e₂ = Z ⊗ c` on `Λ(ℂ²) ≅ ℂ⁴`, and the
//! Clifford grading by `σ = X ⊗ Z ⊗ Z` on `ℂ² ⊗ Λ(ℂ²)`. On the space
//! `ℂ² ⊗ Λ(ℂ²) ⊗ modes` the operator
//! `A = t·D² + √t·σ(R^φ e₁ + R^ψ e₂)` is exponentiated densely; the
//! `db^φ∧db^ψ` coefficient of `Tr D e^{−A}` is the `|11⟩⟨00|` entry of the
//! `Λ` factor in the `(0, 0)` Clifford block.

use maslov_eta::{CMat, Complex64};
use nalgebra::DMatrix;

fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

fn small(rows: &[[f64; 2]; 2]) -> CMat {
    DMatrix::from_fn(2, 2, |i, j| Complex64::new(rows[i][j], 0.0))
}

/// Coefficient of `db^φ ∧ db^ψ` in `Tr D exp(−(tD² + √t·G(R^φ e₁ + R^ψ e₂)))`
/// with `G = σ` when `graded`, `G = 1` otherwise.
pub fn two_insertion_coefficient(lambdas: &[f64], ra: &CMat, rb: &CMat, t: f64, graded: bool) -> Complex64 {
    let n = lambdas.len();
    let id2 = CMat::identity(2, 2);
    let idn = CMat::identity(n, n);
    let cr = small(&[[0.0, 0.0], [1.0, 0.0]]); // |1⟩⟨0|
    let z = small(&[[1.0, 0.0], [0.0, -1.0]]);
    let x = small(&[[0.0, 1.0], [1.0, 0.0]]);
    let e1 = kron(&cr, &id2);
    let e2 = kron(&z, &cr);
    let sigma = if graded { kron(&x, &kron(&z, &z)) } else { CMat::identity(8, 8) };
    let dd = DMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(lambdas[i], 0.0) } else { Complex64::new(0.0, 0.0) });
    let d2 = &dd * &dd;
    let big_d2 = kron(&CMat::identity(8, 8), &d2);
    let b = kron(&kron(&id2, &e1), ra) + kron(&kron(&id2, &e2), rb);
    let s = kron(&sigma, &idn);
    let a = big_d2 * Complex64::new(t, 0.0) + s * b * Complex64::new(t.sqrt(), 0.0);
    let e = (-a).exp();
    let big_d = kron(&CMat::identity(8, 8), &dd);
    let m = big_d * e;
    // Clifford block (0,0), Λ entry ⟨11|·|00⟩, traced over modes.
    let row0 = 3 * n; // C-index 0, Λ-index |11⟩ = 3
    let col0 = 0; // C-index 0, Λ-index |00⟩ = 0
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..n {
        tr += m[(row0 + i, col0 + i)];
    }
    tr
}
