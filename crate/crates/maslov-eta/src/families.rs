//! Built-in families of Lagrangian triples over base grids.
//!
//! A family is stored through the unitary blocks `p_i(b)` of its
//! projections `P_i(b) = P(p_i(b))`, one `d × d` matrix per grid node.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms_grid::{BaseGrid, GridKind};
use crate::lagrangian::{self, LagrangianProjection};
use crate::matkernel::{self, identity};
use crate::{CMat, Complex64, Tol};

/// A family of pairs `(P(p₀(b)), P(p₁(b)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFamily {
    /// Base grid.
    pub grid: BaseGrid,
    /// Unitary block of the first projection per node.
    pub p0: Vec<CMat>,
    /// Unitary block of the second projection per node.
    pub p1: Vec<CMat>,
}

/// A family of triples `(P(p₀(b)), P(p₁(b)), P(p₂(b)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleFamily {
    /// Base grid.
    pub grid: BaseGrid,
    /// Unitary blocks `[p₀, p₁, p₂]`, each one matrix per node.
    pub blocks: [Vec<CMat>; 3],
}

/// The three ordered pairs entering the cyclic eta sum.
pub const CYCLIC_PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

impl TripleFamily {
    /// Build a family from per-node unitary blocks, checking shapes and
    /// unitarity.
    pub fn new(grid: BaseGrid, blocks: [Vec<CMat>; 3], tol: &Tol) -> Result<Self> {
        let n = grid.len();
        let d = blocks[0].first().map(|m| m.nrows()).unwrap_or(0);
        if d == 0 {
            return Err(Error::Precondition("family: empty blocks".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.len() != n {
                return Err(Error::Precondition(format!("family: block {i} has {} nodes, grid has {n}", b.len())));
            }
            for (k, m) in b.iter().enumerate() {
                if m.nrows() != d || m.ncols() != d {
                    return Err(Error::Precondition(format!("family: block {i} at node {:?} is not {d}×{d}", grid.multi_index(k))));
                }
                if !matkernel::is_unitary(m, tol.mat.sqrt()) {
                    return Err(Error::Malformed(format!("block {i} at node {:?} is not unitary", grid.multi_index(k))));
                }
            }
        }
        Ok(TripleFamily { grid, blocks })
    }

    /// Half-dimension `d`.
    pub fn d(&self) -> usize {
        self.blocks[0][0].nrows()
    }

    /// The pair family `(P_i, P_j)`.
    pub fn pair(&self, i: usize, j: usize) -> PairFamily {
        PairFamily { grid: self.grid.clone(), p0: self.blocks[i].clone(), p1: self.blocks[j].clone() }
    }

    /// Check pairwise transversality at every node; the error names the pair
    /// and the node multi-index.
    pub fn validate(&self, tol: &Tol) -> Result<()> {
        let d = self.d();
        for k in 0..self.grid.len() {
            for (i, j) in [(0, 1), (1, 2), (0, 2)] {
                let w = self.blocks[i][k].adjoint() * &self.blocks[j][k];
                if !matkernel::is_invertible(&(identity::<f64>(d) - w), tol.cond) {
                    return Err(Error::Transversality { i, j, node: Some(self.grid.multi_index(k)) });
                }
            }
        }
        Ok(())
    }

    /// Projections per node.
    pub fn projections(&self, tol: &Tol) -> Result<Vec<[LagrangianProjection<f64>; 3]>> {
        (0..self.grid.len())
            .map(|k| {
                let f = |i: usize| lagrangian::from_unitary(&self.blocks[i][k], tol).map_err(|e| e.at_node(&self.grid.multi_index(k)));
                Ok([f(0)?, f(1)?, f(2)?])
            })
            .collect()
    }

    /// Grid multi-indices of all nodes.
    pub fn node_indices(&self) -> Vec<Vec<usize>> {
        (0..self.grid.len()).map(|k| self.grid.multi_index(k)).collect()
    }
}

impl PairFamily {
    /// Check transversality at every node.
    pub fn validate(&self, tol: &Tol) -> Result<()> {
        let d = self.p0[0].nrows();
        for k in 0..self.grid.len() {
            let w = self.p0[k].adjoint() * &self.p1[k];
            if !matkernel::is_invertible(&(identity::<f64>(d) - w), tol.cond) {
                return Err(Error::Transversality { i: 0, j: 1, node: Some(self.grid.multi_index(k)) });
            }
        }
        Ok(())
    }
}

/// A constant family over a grid.
pub fn constant_triple(grid: BaseGrid, u: [CMat; 3], tol: &Tol) -> Result<TripleFamily> {
    let n = grid.len();
    let blocks = u.map(|m| vec![m; n]);
    TripleFamily::new(grid, blocks, tol)
}

/// Scalar triple `(P(u₀), P(u₁), P(u₂))` over a point.
pub fn scalar_triple(u: [Complex64; 3], tol: &Tol) -> Result<TripleFamily> {
    for z in &u {
        if (z.norm() - 1.0).abs() > tol.mat.sqrt() {
            return Err(Error::Malformed(format!("scalar block {z} is not unimodular")));
        }
    }
    constant_triple(BaseGrid::point(), u.map(|z| DMatrix::from_element(1, 1, z)), tol)
}

/// Pauli matrices `σ₁, σ₂, σ₃`.
pub fn pauli() -> [CMat; 3] {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    [
        DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

/// The projection `q = ½(1 + n·σ)` for a unit vector `n`.
pub fn bott_projection(n: [f64; 3]) -> CMat {
    let s = pauli();
    let mut q = identity::<f64>(2);
    for (a, sa) in s.iter().enumerate() {
        q += sa * Complex64::new(n[a], 0.0);
    }
    q * Complex64::new(0.5, 0.0)
}

/// One smooth ambient perturbation term `a · sin(ω·x + β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTerm {
    /// Vector amplitude.
    pub a: [f64; 3],
    /// Ambient frequency vector.
    pub omega: [f64; 3],
    /// Phase.
    pub beta: f64,
}

/// Axis map `n(φ, ψ) = normalize(n_k(φ, ψ) + s·c(n_k(φ, ψ)))` with
/// `n_k(φ, ψ) = (sin φ cos kψ, sin φ sin kψ, cos φ)` and a smooth ambient
/// vector field `c`; the composition keeps `n` continuous at the poles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisMap {
    /// Winding `k` in `ψ` (the mapping degree).
    pub degree: i32,
    /// Perturbation strength `s`.
    #[serde(default)]
    pub strength: f64,
    /// Ambient perturbation terms.
    #[serde(default)]
    pub terms: Vec<PerturbationTerm>,
}

impl Default for AxisMap {
    fn default() -> Self {
        AxisMap { degree: 1, strength: 0.0, terms: Vec::new() }
    }
}

impl AxisMap {
    /// Degree-`k` map without perturbation.
    pub fn round(degree: i32) -> Self {
        AxisMap { degree, strength: 0.0, terms: Vec::new() }
    }

    /// Seeded perturbation with `n_terms` low-frequency terms; amplitudes are
    /// normalised so that `|c| ≤ 1` everywhere.
    pub fn perturbed(degree: i32, strength: f64, n_terms: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms: Vec<PerturbationTerm> = (0..n_terms)
            .map(|_| PerturbationTerm {
                a: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                omega: [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                beta: rng.gen_range(0.0..2.0 * PI),
            })
            .collect();
        let total: f64 = terms.iter().map(|t| t.a.iter().map(|x| x * x).sum::<f64>().sqrt()).sum();
        if total > 0.0 {
            for t in &mut terms {
                for x in &mut t.a {
                    *x /= total;
                }
            }
        }
        AxisMap { degree, strength, terms }
    }

    fn field(&self, x: [f64; 3]) -> [f64; 3] {
        let mut c = [0.0; 3];
        for t in &self.terms {
            let s = (t.omega[0] * x[0] + t.omega[1] * x[1] + t.omega[2] * x[2] + t.beta).sin();
            for a in 0..3 {
                c[a] += t.a[a] * s;
            }
        }
        c
    }

    /// Evaluate the unit axis at sphere coordinates; fails if the perturbed
    /// vector degenerates.
    pub fn eval(&self, phi: f64, psi: f64) -> Result<[f64; 3]> {
        let k = self.degree as f64;
        let n0 = [phi.sin() * (k * psi).cos(), phi.sin() * (k * psi).sin(), phi.cos()];
        let c = self.field(n0);
        let v = [n0[0] + self.strength * c[0], n0[1] + self.strength * c[1], n0[2] + self.strength * c[2]];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if r < 1e-3 {
            return Err(Error::Precondition(format!("axis map degenerates at (φ, ψ) = ({phi}, {psi})")));
        }
        Ok([v[0] / r, v[1] / r, v[2] / r])
    }
}

/// Bott projection field `q(b)` on a sphere grid.
pub fn bott_field(grid: &BaseGrid, map: &AxisMap) -> Result<Vec<CMat>> {
    if grid.kind != GridKind::SphereRect {
        return Err(Error::Precondition("the Bott family lives on a sphere_rect grid".into()));
    }
    (0..grid.len())
        .map(|k| {
            let c = grid.coords(k);
            Ok(bott_projection(map.eval(c[0], c[1])?))
        })
        .collect()
}

/// The Bott triple `(Ps, P(2q−1), P(1−2q))` written through its unitary
/// blocks `(1, i(2q−1), i(1−2q))`: the blocks `(a + i)(a − i)⁻¹` of
/// `a₁ = 2q − 1` and `a₂ = −a₁`, so that the Maslov projection is `q`.
pub fn bott_triple(grid: BaseGrid, map: &AxisMap, tol: &Tol) -> Result<TripleFamily> {
    let q = bott_field(&grid, map)?;
    triple_from_hermitian_involutions(grid, &q, tol)
}

fn triple_from_hermitian_involutions(grid: BaseGrid, q: &[CMat], tol: &Tol) -> Result<TripleFamily> {
    let d = q[0].nrows();
    let one = identity::<f64>(d);
    let i = Complex64::new(0.0, 1.0);
    let p1: Vec<CMat> = q.iter().map(|q| (q * Complex64::new(2.0, 0.0) - &one) * i).collect();
    let p2: Vec<CMat> = p1.iter().map(|p| -p).collect();
    let p0 = vec![one; q.len()];
    TripleFamily::new(grid, [p0, p1, p2], tol)
}

/// Rotating Bott projection on `sphere_circle`:
/// `q(φ, ψ, χ) = ½(1 + (R_x(a sin χ) n(φ, ψ))·σ)`.
pub fn rotating_bott_field(grid: &BaseGrid, map: &AxisMap, amplitude: f64) -> Result<Vec<CMat>> {
    if grid.kind != GridKind::SphereCircle {
        return Err(Error::Precondition("the rotating Bott field lives on a sphere_circle grid".into()));
    }
    (0..grid.len())
        .map(|k| {
            let c = grid.coords(k);
            let n = map.eval(c[0], c[1])?;
            let a = amplitude * c[2].sin();
            let (s, co) = a.sin_cos();
            Ok(bott_projection([n[0], co * n[1] - s * n[2], s * n[1] + co * n[2]]))
        })
        .collect()
}

/// Diagonal winding family over a circle or torus:
/// `p_i(b) = diag_j exp(i(α_{ij} + Σ_a m_{ja} b_a))`.
///
/// The windings `m_j` are shared by the three projections, so the relative
/// unitaries `p_i* p_j` are constant and transversality is decided by the
/// phases alone.
pub fn winding_triple(grid: BaseGrid, phases: [Vec<f64>; 3], windings: &[Vec<i32>], tol: &Tol) -> Result<TripleFamily> {
    if !matches!(grid.kind, GridKind::Circle | GridKind::Torus) {
        return Err(Error::Precondition("winding families live on circle or torus grids".into()));
    }
    let d = phases[0].len();
    if d == 0 || phases.iter().any(|p| p.len() != d) || windings.len() != d {
        return Err(Error::Precondition("winding family: inconsistent branch counts".into()));
    }
    let dim = grid.dim();
    if windings.iter().any(|m| m.len() != dim) {
        return Err(Error::Precondition(format!("winding family: each branch needs {dim} winding numbers")));
    }
    let blocks = [0, 1, 2].map(|i| {
        (0..grid.len())
            .map(|k| {
                let b = grid.coords(k);
                let diag: Vec<Complex64> = (0..d)
                    .map(|j| {
                        let arg = phases[i][j] + windings[j].iter().zip(&b).map(|(m, x)| *m as f64 * x).sum::<f64>();
                        Complex64::from_polar(1.0, arg)
                    })
                    .collect();
                matkernel::diag(&diag)
            })
            .collect::<Vec<_>>()
    });
    let fam = TripleFamily::new(grid, blocks, tol)?;
    fam.validate(tol)?;
    Ok(fam)
}
