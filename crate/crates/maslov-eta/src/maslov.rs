//! Maslov index of a triple of pairwise transverse Lagrangian projections.
//!
//! The index is the signature of the hermitian form
//! `h(x, y) = ⟨x₂, I₀ y₁⟩` on `Ran P₀`, where `x = x₁ + x₂` is the
//! decomposition along `Ran P₁ ⊕ Ran P₂`. Its matrix is
//! `A = P₀(P₁+P₂)⁻¹P₂ I₀ P₁(P₁+P₂)⁻¹P₀`, whose kernel contains `Ker P₀`.

use crate::error::{Error, Result};
use crate::lagrangian::{self, i0, is_transverse, LagrangianProjection};
use crate::matkernel::{self, cr, identity, SignCounts};
use crate::scalar::{CMatrix, Scalar, Tolerances};

/// Signature data of a Maslov triple.
#[derive(Debug, Clone, PartialEq)]
pub struct MaslovResult<T: Scalar> {
    /// The index `n_pos − n_neg`.
    pub tau: i64,
    /// The hermitian form matrix `A`.
    pub form_matrix: CMatrix<T>,
    /// Eigenvalue sign counts of `A`.
    pub counts: SignCounts,
}

fn check_triple<T: Scalar>(ps: [&LagrangianProjection<T>; 3], tol: &Tolerances<T>) -> Result<()> {
    let d = ps[0].d();
    if ps.iter().any(|p| p.d() != d) {
        return Err(Error::Precondition("Maslov triple: dimension mismatch".into()));
    }
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        if !is_transverse(ps[i], ps[j], tol) {
            return Err(Error::Transversality { i, j, node: None });
        }
    }
    Ok(())
}

/// The hermitian form matrix `A` of the triple.
pub fn maslov_form_matrix<T: Scalar>(
    p0: &LagrangianProjection<T>,
    p1: &LagrangianProjection<T>,
    p2: &LagrangianProjection<T>,
    tol: &Tolerances<T>,
) -> Result<CMatrix<T>> {
    check_triple([p0, p1, p2], tol)?;
    let d = p0.d();
    let s = matkernel::inverse(&(p1.matrix() + p2.matrix()), tol.cond)?;
    let a = p0.matrix() * &s * p2.matrix() * i0::<T>(d) * p1.matrix() * &s * p0.matrix();
    // Symmetrise away rounding; the form is hermitian by the Lagrangian property.
    Ok((&a + a.adjoint()) * cr(T::lit(0.5)))
}

/// Maslov index as the signature of the form matrix.
///
/// Fails with [`Error::Degeneracy`] if `A` has more than `d` eigenvalues in
/// `[-gap_tol, gap_tol]`.
pub fn maslov_index<T: Scalar>(
    p0: &LagrangianProjection<T>,
    p1: &LagrangianProjection<T>,
    p2: &LagrangianProjection<T>,
    tol: &Tolerances<T>,
) -> Result<MaslovResult<T>> {
    let a = maslov_form_matrix(p0, p1, p2, tol)?;
    let (_, counts) = matkernel::spectral_projection_pos(&a, tol.gap, tol)?;
    if counts.n_zero != p0.d() {
        return Err(Error::Degeneracy { n_zero: counts.n_zero, expected: p0.d(), node: None });
    }
    Ok(MaslovResult { tau: counts.n_pos as i64 - counts.n_neg as i64, form_matrix: a, counts })
}

/// Preimage `a = i(p + 1)(p − 1)⁻¹` of a unitary block, i.e. the hermitian
/// `a` with `p = (a + i)(a − i)⁻¹`.
///
/// This is the parametrisation in which the Maslov projection of the triple
/// `(Ps, P(p₁), P(p₂))` is `1_{x>0}(a₁ − a₂)`; it is the complex conjugate of
/// the convention of [`lagrangian::cayley`], so `cayley_inverse` of
/// `cayley(a)` is `−a`.
pub fn cayley_inverse<T: Scalar>(p: &CMatrix<T>, tol: &Tolerances<T>) -> Result<CMatrix<T>> {
    let e = matkernel::unitary_eig(p, tol)?;
    let two_pi = T::two_pi();
    if let Some(&bad) = e.values.iter().find(|&&t| t < tol.branch || t > two_pi - tol.branch) {
        return Err(Error::BranchCut { phase: bad.to_f64(), node: None });
    }
    // i(e^{iθ}+1)/(e^{iθ}−1) = cot(θ/2), real on the spectrum.
    Ok(matkernel::functional_calculus(&e, |t| {
        let h = t * T::lit(0.5);
        cr(h.cos() / h.sin())
    }))
}

/// The projection `p⁺ = 1_{x>0}(a₁ − a₂)` for the triple `(Ps, P₁, P₂)`,
/// with `a_j = i(p_j + 1)(p_j − 1)⁻¹`; `tr p⁺ − tr(1 − p⁺)` is the index.
pub fn maslov_projection<T: Scalar>(p1: &LagrangianProjection<T>, p2: &LagrangianProjection<T>, tol: &Tolerances<T>) -> Result<CMatrix<T>> {
    let ps = lagrangian::ps::<T>(p1.d());
    check_triple([&ps, p1, p2], tol)?;
    let a1 = cayley_inverse(&lagrangian::unitary_of(p1, tol)?, tol)?;
    let a2 = cayley_inverse(&lagrangian::unitary_of(p2, tol)?, tol)?;
    let diff = a1 - a2;
    let diff = (&diff + diff.adjoint()) * cr(T::lit(0.5));
    let (p, counts) = matkernel::spectral_projection_pos(&diff, tol.gap, tol)?;
    if counts.n_zero != 0 {
        return Err(Error::Degeneracy { n_zero: counts.n_zero, expected: 0, node: None });
    }
    Ok(p)
}

/// `tr p − tr(1 − p)` for a projection matrix `p`.
pub fn projection_index<T: Scalar>(p: &CMatrix<T>) -> i64 {
    let n = p.nrows() as f64;
    let tr = p.trace().re.to_f64();
    (2.0 * tr - n).round() as i64
}

/// Maslov data of a triple family sampled on grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMaslov<T: Scalar> {
    /// Common value of the index.
    pub tau: i64,
    /// Per-node sign counts.
    pub counts: Vec<SignCounts>,
    /// Per-node `p⁺` (present when every `P₀(b)` equals `Ps`).
    pub p_plus: Option<Vec<CMatrix<T>>>,
}

/// Maslov index over a family of triples; `nodes[k]` is the grid multi-index
/// of `triples[k]` and is used in error messages.
///
/// The index is computed independently at every node and must be constant.
pub fn maslov_index_family<T: Scalar>(
    triples: &[[LagrangianProjection<T>; 3]],
    nodes: &[Vec<usize>],
    tol: &Tolerances<T>,
) -> Result<FamilyMaslov<T>> {
    use rayon::prelude::*;
    if triples.is_empty() {
        return Err(Error::Precondition("maslov_index_family: empty family".into()));
    }
    let results: Vec<Result<(i64, SignCounts, Option<CMatrix<T>>)>> = triples
        .par_iter()
        .enumerate()
        .map(|(k, t)| {
            let r = maslov_index(&t[0], &t[1], &t[2], tol).map_err(|e| e.at_node(&nodes[k]))?;
            let d = t[0].d();
            let is_ps = matkernel::norm(&(t[0].matrix() - lagrangian::ps::<T>(d).matrix())) <= tol.mat;
            let pp = if is_ps { Some(maslov_projection(&t[1], &t[2], tol).map_err(|e| e.at_node(&nodes[k]))?) } else { None };
            Ok((r.tau, r.counts, pp))
        })
        .collect();
    let mut tau0 = None;
    let mut counts = Vec::with_capacity(triples.len());
    let mut pps = Vec::with_capacity(triples.len());
    let mut all_ps = true;
    for (k, r) in results.into_iter().enumerate() {
        let (tau, c, pp) = r?;
        match tau0 {
            None => tau0 = Some((tau, k)),
            Some((t0, k0)) if t0 != tau => {
                return Err(Error::ContinuityBreak { first: t0, first_node: nodes[k0].clone(), other: tau, other_node: nodes[k].clone() });
            }
            _ => {}
        }
        counts.push(c);
        match pp {
            Some(p) => pps.push(p),
            None => all_ps = false,
        }
    }
    Ok(FamilyMaslov { tau: tau0.map(|t| t.0).unwrap_or(0), counts, p_plus: if all_ps { Some(pps) } else { None } })
}

/// The gluing combination
/// `τ_I(P₀,P₁,P₂) = τ(P₀,P₁,P₂) + τ(P₀,1−P₁,P₁) + τ(P₁,1−P₂,P₂) + τ(P₂,1−P₀,P₀)`.
///
/// Every constituent triple must be pairwise transverse; a failure names the
/// constituent (0..4) and the pair inside it.
pub fn tau_i<T: Scalar>(
    p0: &LagrangianProjection<T>,
    p1: &LagrangianProjection<T>,
    p2: &LagrangianProjection<T>,
    tol: &Tolerances<T>,
) -> Result<(i64, [i64; 4])> {
    let c0 = p0.complement();
    let c1 = p1.complement();
    let c2 = p2.complement();
    let triples = [[p0, p1, p2], [p0, &c1, p1], [p1, &c2, p2], [p2, &c0, p0]];
    let mut parts = [0i64; 4];
    for (k, t) in triples.iter().enumerate() {
        let r = maslov_index(t[0], t[1], t[2], tol).map_err(|e| match e {
            Error::Transversality { i, j, .. } => Error::ConstituentTransversality { constituent: k, i, j },
            other => other,
        })?;
        parts[k] = r.tau;
    }
    Ok((parts.iter().sum(), parts))
}

/// `1 − P` helper kept for symmetry with the projection API.
pub fn complement_matrix<T: Scalar>(p: &CMatrix<T>) -> CMatrix<T> {
    identity::<T>(p.nrows()) - p
}
