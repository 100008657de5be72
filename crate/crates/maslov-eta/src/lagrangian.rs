//! Lagrangian projections on `ℂ^{2d}`: construction from unitaries, the
//! Cayley parametrisation, transversality, standardisation of pairs and
//! smooth unitary paths realising boundary conditions.
//!
//! Conventions: `I₀ = diag(i·1_d, −i·1_d)`; every Lagrangian projection has
//! the form `P(p) = ½[[1, p*], [p, 1]]` with `p` a `d×d` unitary, and
//! `Ps = P(1)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matkernel::{self, ci, cr, identity, is_invertible, is_unitary, norm};
use crate::scalar::{CMatrix, Scalar, Tolerances};

/// The symplectic structure `I₀ = diag(i·1_d, −i·1_d)`.
pub fn i0<T: Scalar>(d: usize) -> CMatrix<T> {
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    for k in 0..d {
        m[(k, k)] = ci();
        m[(d + k, d + k)] = -ci::<T>();
    }
    m
}

/// Assemble a `2d×2d` matrix from four `d×d` blocks.
pub fn blocks<T: Scalar>(a: &CMatrix<T>, b: &CMatrix<T>, c: &CMatrix<T>, e: &CMatrix<T>) -> CMatrix<T> {
    let d = a.nrows();
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    m.view_mut((0, 0), (d, d)).copy_from(a);
    m.view_mut((0, d), (d, d)).copy_from(b);
    m.view_mut((d, 0), (d, d)).copy_from(c);
    m.view_mut((d, d), (d, d)).copy_from(e);
    m
}

/// Block-diagonal `diag(a, b)`.
pub fn block_diag<T: Scalar>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    let z = DMatrix::zeros(a.nrows(), a.nrows());
    blocks(a, &z, &z, b)
}

/// Selfadjoint projection `P` on `ℂ^{2d}` with `P I₀ = I₀(1 − P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianProjection<T: Scalar> {
    d: usize,
    p: CMatrix<T>,
}

impl<T: Scalar> LagrangianProjection<T> {
    /// Validate and wrap a `2d×2d` matrix.
    pub fn new(p: CMatrix<T>, tol: &Tolerances<T>) -> Result<Self> {
        if !p.is_square() || p.nrows() % 2 != 0 || p.nrows() == 0 {
            return Err(Error::Malformed(format!("expected a 2d×2d matrix, got {}x{}", p.nrows(), p.ncols())));
        }
        let d = p.nrows() / 2;
        if !matkernel::is_projection(&p, tol.mat) {
            return Err(Error::Malformed("not a selfadjoint idempotent".into()));
        }
        let i = i0::<T>(d);
        let lag = norm(&(&p * &i - &i * (identity::<T>(2 * d) - &p)));
        if lag > tol.mat {
            return Err(Error::Malformed(format!("P I₀ ≠ I₀(1−P) (residual {:.3e})", lag.to_f64())));
        }
        Ok(LagrangianProjection { d, p })
    }

    /// Half-dimension `d`.
    pub fn d(&self) -> usize {
        self.d
    }

    /// The `2d×2d` projection matrix.
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.p
    }

    /// The complementary projection `1 − P` (again Lagrangian).
    pub fn complement(&self) -> Self {
        LagrangianProjection { d: self.d, p: identity::<T>(2 * self.d) - &self.p }
    }

    /// Conjugate by a block-diagonal unitary commuting with `I₀`.
    pub fn conjugate(&self, u: &CMatrix<T>, tol: &Tolerances<T>) -> Result<Self> {
        Self::new(u * &self.p * u.adjoint(), tol)
    }
}

/// `P(p) = ½[[1, p*], [p, 1]]` for a `d×d` unitary `p`.
pub fn from_unitary<T: Scalar>(p: &CMatrix<T>, tol: &Tolerances<T>) -> Result<LagrangianProjection<T>> {
    if !p.is_square() || p.nrows() == 0 {
        return Err(Error::Precondition("from_unitary: expected a non-empty square matrix".into()));
    }
    let d = p.nrows();
    if !is_unitary(p, tol.mat * T::lit(d as f64).sqrt().max(T::one())) {
        return Err(Error::Precondition("from_unitary: input not unitary".into()));
    }
    let half = cr(T::lit(0.5));
    let one = identity::<T>(d);
    let m = blocks(&one, &p.adjoint(), p, &one) * half;
    Ok(LagrangianProjection { d, p: m })
}

/// `Ps = P(1)`.
pub fn ps<T: Scalar>(d: usize) -> LagrangianProjection<T> {
    from_unitary(&identity::<T>(d), &Tolerances::default()).expect("identity is unitary")
}

/// The unitary block `p = 2·(lower-left block of P)`.
pub fn unitary_of<T: Scalar>(p: &LagrangianProjection<T>, tol: &Tolerances<T>) -> Result<CMatrix<T>> {
    let d = p.d;
    let u = p.p.view((d, 0), (d, d)).into_owned() * cr(T::lit(2.0));
    if !is_unitary(&u, tol.mat * T::lit(4.0)) {
        return Err(Error::Malformed("lower-left block is not half a unitary".into()));
    }
    Ok(u)
}

/// Cayley parametrisation: the Lagrangian projection with unitary block
/// `(a − i)(a + i)⁻¹` for hermitian `a`; always transverse to `Ps`.
pub fn cayley<T: Scalar>(a: &CMatrix<T>, tol: &Tolerances<T>) -> Result<LagrangianProjection<T>> {
    let e = matkernel::herm_eig(a, tol)?;
    // (x − i)/(x + i) evaluated on the spectrum (exact for hermitian a).
    let u = matkernel::functional_calculus(&e, |x| (cr(x) - ci::<T>()) / (cr(x) + ci::<T>()));
    from_unitary(&u, tol)
}

/// Transversality: `P₁ + P₂` invertible at `tol.cond`.
pub fn is_transverse<T: Scalar>(p1: &LagrangianProjection<T>, p2: &LagrangianProjection<T>, tol: &Tolerances<T>) -> bool {
    p1.d == p2.d && is_invertible(&(&p1.p + &p2.p), tol.cond)
}

/// A pair `(P₀, P₁)` brought into the normal form `(Ps, P(w))`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedPair<T: Scalar> {
    /// Block-diagonal unitary `U = diag(1, p₀*)` with `U P₀ U* = Ps`.
    pub u: CMatrix<T>,
    /// Unitary block of `U P₁ U*`: `w = p₀* p₁`.
    pub w: CMatrix<T>,
    /// Unitary block `p₀` of `P₀`.
    pub p0: CMatrix<T>,
    /// Unitary block `p₁` of `P₁`.
    pub p1: CMatrix<T>,
}

impl<T: Scalar> StandardizedPair<T> {
    /// Half-dimension `d`.
    pub fn d(&self) -> usize {
        self.w.nrows()
    }
}

/// Standardise a transverse pair.
pub fn standardize_pair<T: Scalar>(p0: &LagrangianProjection<T>, p1: &LagrangianProjection<T>, tol: &Tolerances<T>) -> Result<StandardizedPair<T>> {
    if p0.d != p1.d {
        return Err(Error::Precondition("standardize_pair: dimension mismatch".into()));
    }
    if !is_transverse(p0, p1, tol) {
        return Err(Error::Transversality { i: 0, j: 1, node: None });
    }
    let u0 = unitary_of(p0, tol)?;
    let u1 = unitary_of(p1, tol)?;
    standardize_unitaries(&u0, &u1, tol)
}

/// Standardise the pair `(P(p₀), P(p₁))` given its unitary blocks.
pub fn standardize_unitaries<T: Scalar>(p0: &CMatrix<T>, p1: &CMatrix<T>, tol: &Tolerances<T>) -> Result<StandardizedPair<T>> {
    let d = p0.nrows();
    let w = p0.adjoint() * p1;
    if !is_invertible(&(identity::<T>(d) - &w), tol.cond) {
        return Err(Error::Transversality { i: 0, j: 1, node: None });
    }
    let u = block_diag(&identity::<T>(d), &p0.adjoint());
    Ok(StandardizedPair { u, w, p0: p0.clone(), p1: p1.clone() })
}

/// The flat smoothing profile `ψ(x) = σ((x − x₁)/(x₂ − x₁))` with
/// `σ(s) = g(s)/(g(s) + g(1 − s))`, `g(s) = e^{−1/s}` for `s > 0`.
///
/// `ψ` vanishes identically on `[0, x₁]`, equals 1 on `[x₂, 1]` and is
/// smooth with all derivatives vanishing at both transition ends.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FlatBump {
    /// Start of the transition.
    pub x1: f64,
    /// End of the transition.
    pub x2: f64,
}

impl Default for FlatBump {
    fn default() -> Self {
        FlatBump { x1: 0.25, x2: 0.75 }
    }
}

fn g(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

fn gp(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp() / (s * s)
    }
}

/// The standard smooth step `σ` on `[0, 1]`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        g(s) / (g(s) + g(1.0 - s))
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_deriv(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let (a, b) = (g(s), g(1.0 - s));
    let (ap, bp) = (gp(s), -gp(1.0 - s));
    (ap * (a + b) - a * (ap + bp)) / ((a + b) * (a + b))
}

impl FlatBump {
    /// Profile value `ψ(x)`.
    pub fn value(&self, x: f64) -> f64 {
        smooth_step((x - self.x1) / (self.x2 - self.x1))
    }

    /// Derivative `ψ'(x)`.
    pub fn deriv(&self, x: f64) -> f64 {
        smooth_step_deriv((x - self.x1) / (self.x2 - self.x1)) / (self.x2 - self.x1)
    }
}

/// Unitary path `U(x) = diag(1, exp(ψ(x)·log(−w*)))·diag(1, p₀*)` sampled at
/// `n_x + 1` uniform nodes of `[0, 1]`.
///
/// `U(0)` maps `P₀` to `Ps` and `U(1)` maps `P₁` to `1 − Ps`. On eigenbranches
/// where `−w*` has eigenvalue 1 the path is constant.
pub fn boundary_unitary_path<T: Scalar>(pair: &StandardizedPair<T>, profile: &FlatBump, n_x: usize, tol: &Tolerances<T>) -> Result<Vec<CMatrix<T>>> {
    if n_x == 0 {
        return Err(Error::Precondition("boundary_unitary_path: n_x must be positive".into()));
    }
    let d = pair.d();
    let target = -pair.w.adjoint();
    let theta = path_generator_checked(&target, tol)?;
    let e = matkernel::herm_eig(&theta, tol)?;
    let one = identity::<T>(d);
    let mut out = Vec::with_capacity(n_x + 1);
    for k in 0..=n_x {
        let x = k as f64 / n_x as f64;
        let s = T::lit(profile.value(x));
        let gamma = matkernel::functional_calculus(&e, |t| {
            let a = s * t;
            nalgebra::Complex::new(a.cos(), a.sin())
        });
        out.push(block_diag(&one, &gamma) * &pair.u);
    }
    Ok(out)
}

/// Generator `Θ = −i log v` for a path endpoint; eigenvalues within the
/// branch tolerance of 1 get the constant path, any eigenvalue in the
/// ambiguous band between `branch_tol` and `sqrt(branch_tol)` is rejected.
pub(crate) fn path_generator_checked<T: Scalar>(v: &CMatrix<T>, tol: &Tolerances<T>) -> Result<CMatrix<T>> {
    let e = matkernel::unitary_eig(v, tol)?;
    let two_pi = T::two_pi();
    for &t in &e.values {
        let dist = t.min(two_pi - t);
        if dist >= tol.branch && dist < tol.branch.sqrt() {
            return Err(Error::BranchCut { phase: t.to_f64(), node: None });
        }
    }
    matkernel::path_generator(v, tol)
}
