//! Dense complex-matrix numerics: eigendecompositions, the branch-cut
//! logarithm, functional calculus for normal matrices, spectral projections
//! and conditioned invertibility tests.
//!
//! All matrix functions are evaluated through an eigendecomposition; every
//! matrix handed to them (hermitian or unitary) is normal, so the result is
//! exact up to the accuracy of the decomposition.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{CMatrix, Scalar, Tolerances, C};

/// Eigendecomposition `M = V Λ V*` of a normal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigDecomp<T: Scalar, E> {
    /// Eigenvalues (real for hermitian input, phases for unitary input).
    pub values: Vec<E>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: CMatrix<T>,
}

/// Counts of positive, negative and (near-)zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct SignCounts {
    /// Eigenvalues above `gap_tol`.
    pub n_pos: usize,
    /// Eigenvalues below `-gap_tol`.
    pub n_neg: usize,
    /// Eigenvalues in `[-gap_tol, gap_tol]`.
    pub n_zero: usize,
}

/// Frobenius norm.
pub fn norm<T: Scalar>(m: &CMatrix<T>) -> T {
    let mut s = T::zero();
    for z in m.iter() {
        s += z.norm_sqr();
    }
    s.sqrt()
}

/// Conjugate transpose.
pub fn adjoint<T: Scalar>(m: &CMatrix<T>) -> CMatrix<T> {
    m.adjoint()
}

/// Identity matrix of size `n`.
pub fn identity<T: Scalar>(n: usize) -> CMatrix<T> {
    DMatrix::identity(n, n)
}

/// Diagonal matrix with the given complex entries.
pub fn diag<T: Scalar>(entries: &[C<T>]) -> CMatrix<T> {
    let n = entries.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, z) in entries.iter().enumerate() {
        m[(i, i)] = *z;
    }
    m
}

/// Scalar multiple of the identity.
pub fn scalar_matrix<T: Scalar>(n: usize, z: C<T>) -> CMatrix<T> {
    identity::<T>(n) * z
}

/// `true` iff `m` is square and `‖m − m*‖ ≤ tol`.
pub fn is_hermitian<T: Scalar>(m: &CMatrix<T>, tol: T) -> bool {
    m.is_square() && norm(&(m - m.adjoint())) <= tol
}

/// `true` iff `m` is square and `‖m*m − 1‖ ≤ tol`.
pub fn is_unitary<T: Scalar>(m: &CMatrix<T>, tol: T) -> bool {
    m.is_square() && norm(&(m.adjoint() * m - identity::<T>(m.nrows()))) <= tol
}

/// `true` iff `m` is a selfadjoint idempotent within `tol`.
pub fn is_projection<T: Scalar>(m: &CMatrix<T>, tol: T) -> bool {
    is_hermitian(m, tol) && norm(&(m * m - m)) <= tol
}

fn require_square<T: Scalar>(m: &CMatrix<T>, what: &str) -> Result<()> {
    if m.is_square() && m.nrows() > 0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{what}: expected a non-empty square matrix, got {}x{}", m.nrows(), m.ncols())))
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues.
///
/// Fails with [`Error::Precondition`] if `h` is not hermitian within
/// `tol.mat` (relative to `max(1, ‖h‖)`).
pub fn herm_eig<T: Scalar>(h: &CMatrix<T>, tol: &Tolerances<T>) -> Result<EigDecomp<T, T>> {
    require_square(h, "herm_eig")?;
    let scale = T::one().max(norm(h));
    let resid = norm(&(h - h.adjoint()));
    if resid > tol.mat * scale {
        return Err(Error::Precondition(format!("herm_eig: input not hermitian (residual {:.3e})", resid.to_f64())));
    }
    let sym = (h + h.adjoint()) * C::new(T::lit(0.5), T::zero());
    let eig = sym.symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::<T>::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigDecomp { values, vectors })
}

/// Phase of a unit complex number in `(0, 2π]` (eigenvalue 1 maps to `2π`).
pub fn phase_0_2pi<T: Scalar>(z: C<T>) -> T {
    let two_pi = T::two_pi();
    let a = z.im.atan2(z.re);
    if a <= T::zero() {
        a + two_pi
    } else {
        a
    }
}

/// Orthonormalize the columns of `v` (modified Gram–Schmidt, two passes).
fn orthonormalize<T: Scalar>(v: &mut CMatrix<T>) {
    let n = v.ncols();
    for _pass in 0..2 {
        for j in 0..n {
            for i in 0..j {
                let mut ip = C::new(T::zero(), T::zero());
                for r in 0..v.nrows() {
                    ip += v[(r, i)].conj() * v[(r, j)];
                }
                for r in 0..v.nrows() {
                    let vi = v[(r, i)];
                    v[(r, j)] -= vi * ip;
                }
            }
            let mut nn = T::zero();
            for r in 0..v.nrows() {
                nn += v[(r, j)].norm_sqr();
            }
            let nn = nn.sqrt();
            for r in 0..v.nrows() {
                v[(r, j)] /= C::new(nn, T::zero());
            }
        }
    }
}

/// Eigendecomposition of a unitary matrix.
///
/// Phases are returned in `(0, 2π]` in ascending order, with `2π` standing
/// for the eigenvalue 1. The eigenvector matrix is unitary.
pub fn unitary_eig<T: Scalar>(u: &CMatrix<T>, tol: &Tolerances<T>) -> Result<EigDecomp<T, T>> {
    require_square(u, "unitary_eig")?;
    let n = u.nrows();
    let resid = norm(&(u.adjoint() * u - identity::<T>(n)));
    if resid > tol.mat * T::lit(n as f64).sqrt().max(T::one()) {
        return Err(Error::Precondition(format!("unitary_eig: input not unitary (residual {:.3e})", resid.to_f64())));
    }
    // A normal matrix has a diagonal Schur form; the Schur vectors are the
    // eigenvectors.
    let eps = T::default_epsilon();
    let schur = u.clone().try_schur(eps, 10_000).ok_or_else(|| Error::Precondition("unitary_eig: Schur iteration did not converge".into()))?;
    let (mut q, t) = schur.unpack();
    orthonormalize(&mut q);
    let raw: Vec<T> = (0..n).map(|i| phase_0_2pi(t[(i, i)])).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| raw[i]).collect();
    let vectors = CMatrix::<T>::from_fn(n, n, |r, c| q[(r, order[c])]);
    Ok(EigDecomp { values, vectors })
}

/// Apply a scalar function to the spectrum: `V diag(f(λ)) V*`.
pub fn functional_calculus<T: Scalar, E: Copy>(e: &EigDecomp<T, E>, f: impl Fn(E) -> C<T>) -> CMatrix<T> {
    let d: Vec<C<T>> = e.values.iter().map(|&x| f(x)).collect();
    &e.vectors * diag(&d) * e.vectors.adjoint()
}

/// `true` iff the phase lies within `branch` of the cut at eigenvalue 1.
fn near_cut<T: Scalar>(theta: T, branch: T) -> bool {
    theta < branch || theta > T::two_pi() - branch
}

/// Logarithm of a unitary with the branch cut along `[0, ∞)`.
///
/// `log e^{iθ} = iθ` with `θ ∈ (0, 2π)`. An eigenvalue within `tol.branch`
/// of 1 raises [`Error::BranchCut`].
pub fn principal_log_unitary<T: Scalar>(u: &CMatrix<T>, tol: &Tolerances<T>) -> Result<CMatrix<T>> {
    let e = unitary_eig(u, tol)?;
    if let Some(&bad) = e.values.iter().find(|&&t| near_cut(t, tol.branch)) {
        return Err(Error::BranchCut { phase: bad.to_f64(), node: None });
    }
    Ok(functional_calculus(&e, |t| C::new(T::zero(), t)))
}

/// Hermitian generator `Θ = −i log u` used by unitary paths.
///
/// Identical to `−i·principal_log_unitary(u)` except that eigenvalues within
/// `tol.branch` of 1 receive the generator 0 (the constant path on that
/// eigenbranch).
pub fn path_generator<T: Scalar>(u: &CMatrix<T>, tol: &Tolerances<T>) -> Result<CMatrix<T>> {
    let e = unitary_eig(u, tol)?;
    Ok(functional_calculus(&e, |t| C::new(if near_cut(t, tol.branch) { T::zero() } else { t }, T::zero())))
}

/// `exp(i s Θ)` for hermitian `Θ`.
pub fn exp_i_hermitian<T: Scalar>(theta: &CMatrix<T>, s: T, tol: &Tolerances<T>) -> Result<CMatrix<T>> {
    let e = herm_eig(theta, tol)?;
    Ok(functional_calculus(&e, |x| {
        let a = s * x;
        C::new(a.cos(), a.sin())
    }))
}

/// `exp(L)` for anti-hermitian `L` (so that `exp(L)` is unitary).
pub fn exp_antihermitian<T: Scalar>(l: &CMatrix<T>, tol: &Tolerances<T>) -> Result<CMatrix<T>> {
    let theta = l * C::new(T::zero(), -T::one());
    exp_i_hermitian(&theta, T::one(), tol)
}

/// Projection onto the eigenvectors of `h` with eigenvalue `> gap_tol`,
/// together with the eigenvalue sign counts at thresholds `±gap_tol`.
pub fn spectral_projection_pos<T: Scalar>(h: &CMatrix<T>, gap_tol: T, tol: &Tolerances<T>) -> Result<(CMatrix<T>, SignCounts)> {
    let e = herm_eig(h, tol)?;
    let mut counts = SignCounts::default();
    for &x in &e.values {
        if x > gap_tol {
            counts.n_pos += 1;
        } else if x < -gap_tol {
            counts.n_neg += 1;
        } else {
            counts.n_zero += 1;
        }
    }
    let p = functional_calculus(&e, |x| C::new(if x > gap_tol { T::one() } else { T::zero() }, T::zero()));
    Ok((p, counts))
}

/// Singular values in descending order.
pub fn singular_values<T: Scalar>(m: &CMatrix<T>) -> Vec<T> {
    let sv = m.clone().svd(false, false).singular_values;
    let mut v: Vec<T> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// `true` iff `σ_min > cond_tol · σ_max` (and the matrix is non-zero).
pub fn is_invertible<T: Scalar>(m: &CMatrix<T>, cond_tol: T) -> bool {
    if !m.is_square() || m.nrows() == 0 {
        return false;
    }
    let sv = singular_values(m);
    let (max, min) = (sv[0], sv[sv.len() - 1]);
    max > T::zero() && min > cond_tol * max
}

/// Inverse of a square matrix, failing when it is not invertible at `cond_tol`.
pub fn inverse<T: Scalar>(m: &CMatrix<T>, cond_tol: T) -> Result<CMatrix<T>> {
    if !is_invertible(m, cond_tol) {
        return Err(Error::Precondition("matrix not invertible".into()));
    }
    m.clone().try_inverse().ok_or_else(|| Error::Precondition("matrix not invertible".into()))
}

/// Complex unit `i`.
pub fn ci<T: Scalar>() -> C<T> {
    Complex::new(T::zero(), T::one())
}

/// Real scalar as a complex number.
pub fn cr<T: Scalar>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}
