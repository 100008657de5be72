//! The interval operator `D_I = I₀ d/dx` on `[0, 1]` with boundary values in
//! `Ran P₀` at 0 and `Ran P₁` at 1: spectrum, eigenfunctions, heat kernels,
//! heat traces and eta-invariants, plus the circle operator used by the
//! gluing identity.
//!
//! After standardising the pair to `(Ps, P(w))`, every eigenvector `v_j` of
//! `w` with `w v_j = e^{iθ_j} v_j`, `θ_j ∈ (0, 2π)`, carries the eigenvalues
//! `λ_{j,k} = θ_j/2 − πk`, `k ∈ ℤ`, with eigenfunctions
//! `f_{j,k}(x) = (v_j e^{iφx}, p₀ v_j e^{−iφx})/√2`, `φ = πk − θ_j/2`.
//! The eta-invariant of a branch is `1 − θ_j/π`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lagrangian::{standardize_pair, LagrangianProjection, StandardizedPair};
use crate::matkernel::{self, cr};
use crate::quadrature::{adaptive, compensated_sum};
use crate::{CMat, Complex64, Tol};

/// Default mode cutoff.
pub const DEFAULT_K: usize = 200;
/// Tail tolerance for truncated spectral and image sums.
pub const TRUNCATION_TOL: f64 = 1e-14;
/// Switch between the Poisson-resummed and the direct heat trace.
pub const T_SWITCH: f64 = 0.5;
/// Agreement required between closed-form and numeric eta-invariants.
pub const ETA_NUM_TOL: f64 = 1e-6;

/// One eigenbranch of the standardised unitary `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Phase `θ ∈ (0, 2π)` of the eigenvalue of `w`.
    pub theta: f64,
    /// Unit eigenvector of `w`.
    pub v: DVector<Complex64>,
}

/// Truncated spectral data of `D_I` for a transverse pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSpectrum {
    /// Eigenbranches ordered by ascending phase.
    pub branches: Vec<Branch>,
    /// Mode cutoff: `k ∈ [−K, K]`.
    pub k_max: usize,
    /// The standardisation of the pair.
    pub standardizer: StandardizedPair<f64>,
}

/// A mode label `(branch, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode {
    /// Branch index.
    pub j: usize,
    /// Lattice index.
    pub k: i64,
}

impl IntervalSpectrum {
    /// Half-dimension `d`.
    pub fn d(&self) -> usize {
        self.branches.len()
    }

    /// Eigenvalue `λ_{j,k} = θ_j/2 − πk`.
    pub fn lambda(&self, j: usize, k: i64) -> f64 {
        self.branches[j].theta / 2.0 - PI * k as f64
    }

    /// All modes within the cutoff, branch-major.
    pub fn modes(&self) -> Vec<Mode> {
        let kk = self.k_max as i64;
        (0..self.d()).flat_map(|j| (-kk..=kk).map(move |k| Mode { j, k })).collect()
    }

    /// Smallest eigenvalue magnitude.
    pub fn lambda_min(&self) -> f64 {
        self.branches.iter().map(|b| (b.theta / 2.0).min(PI - b.theta / 2.0)).fold(f64::INFINITY, f64::min)
    }

    /// Smallest `|λ|` among the modes at the truncation edge `k = ±K`.
    pub fn edge_lambda(&self) -> f64 {
        let kk = self.k_max as i64;
        (0..self.d()).map(|j| self.lambda(j, kk).abs().min(self.lambda(j, -kk).abs())).fold(f64::INFINITY, f64::min)
    }
}

/// Branch data of a unitary `w`; fails if a phase is within the branch
/// tolerance of `0`/`2π`.
pub fn branches_of(w: &CMat, tol: &Tol) -> Result<Vec<Branch>> {
    let e = matkernel::unitary_eig(w, tol)?;
    let mut out = Vec::with_capacity(e.values.len());
    for (j, &theta) in e.values.iter().enumerate() {
        if theta < tol.branch || theta > 2.0 * PI - tol.branch {
            return Err(Error::BranchCut { phase: theta, node: None });
        }
        out.push(Branch { theta, v: e.vectors.column(j).into_owned() });
    }
    Ok(out)
}

/// Spectrum of `D_I` for the pair `(P₀, P₁)` with mode cutoff `K`.
pub fn spectrum(p0: &LagrangianProjection<f64>, p1: &LagrangianProjection<f64>, k_max: usize, tol: &Tol) -> Result<IntervalSpectrum> {
    let std = standardize_pair(p0, p1, tol)?;
    spectrum_of_standardized(std, k_max, tol)
}

/// Spectrum from an already standardised pair.
pub fn spectrum_of_standardized(std: StandardizedPair<f64>, k_max: usize, tol: &Tol) -> Result<IntervalSpectrum> {
    let branches = branches_of(&std.w, tol)?;
    Ok(IntervalSpectrum { branches, k_max, standardizer: std })
}

/// Eigenfunction `f_{j,k}(x)` in the original (non-standardised) frame.
pub fn eigenfunction(spec: &IntervalSpectrum, j: usize, k: i64, x: f64) -> Result<DVector<Complex64>> {
    if j >= spec.d() || k.unsigned_abs() as usize > spec.k_max {
        return Err(Error::IndexOutOfRange(format!("mode (j={j}, k={k}) with d={} and K={}", spec.d(), spec.k_max)));
    }
    let d = spec.d();
    let b = &spec.branches[j];
    let phi = PI * k as f64 - b.theta / 2.0;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let ep = Complex64::from_polar(s, phi * x);
    let em = ep.conj();
    let lower = &spec.standardizer.p0 * &b.v * em;
    let mut f = DVector::zeros(2 * d);
    for r in 0..d {
        f[r] = b.v[r] * ep;
        f[d + r] = lower[r];
    }
    Ok(f)
}

/// Scalar free heat kernel on `ℝ/4ℤ`:
/// `H(t, x, y) = (4πt)^{−1/2} Σ_k exp(−(x − y + 4k)²/4t)`.
pub fn periodic_heat(t: f64, z: f64) -> f64 {
    let (terms, _) = image_terms(t, z);
    let pref = 1.0 / (4.0 * PI * t).sqrt();
    pref * compensated_sum(terms.iter().map(|&(_, e)| e))
}

/// `∂_x H(t, x, y)` with `z = x − y`.
pub fn periodic_heat_dz(t: f64, z: f64) -> f64 {
    let (terms, _) = image_terms(t, z);
    let pref = 1.0 / (4.0 * PI * t).sqrt();
    pref * compensated_sum(terms.iter().map(|&(s, e)| -s / (2.0 * t) * e))
}

/// Image cutoff: smallest `K_img` with `e^{−(4K_img − 2)²/4t} < TRUNCATION_TOL`.
pub fn image_cutoff(t: f64) -> usize {
    let need = (4.0 * t * (1.0 / TRUNCATION_TOL).ln()).sqrt();
    (((need + 2.0) / 4.0).ceil() as usize).max(1)
}

fn image_terms(t: f64, z: f64) -> (Vec<(f64, f64)>, usize) {
    let kimg = image_cutoff(t) as i64 + 1;
    let terms = (-kimg..=kimg)
        .map(|k| {
            let s = z + 4.0 * k as f64;
            (s, (-s * s / (4.0 * t)).exp())
        })
        .collect();
    (terms, kimg as usize)
}

fn images_blocks(t: f64, x: f64, y: f64, h: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let a = h(t, x - y);
    let b = h(t, x - (2.0 - y));
    let c = h(t, x - (y + 2.0));
    let e = h(t, x - (4.0 - y));
    // (Ps block, (1 − Ps) block)
    (a - b - c + e, a + b - c - e)
}

fn assemble_ps_blocks(d: usize, on_ps: f64, on_comp: f64) -> CMat {
    // Ps = ½[[1,1],[1,1]] ⊗ 1_d, 1 − Ps = ½[[1,−1],[−1,1]] ⊗ 1_d.
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    let same = 0.5 * (on_ps + on_comp);
    let cross = 0.5 * (on_ps - on_comp);
    for r in 0..d {
        m[(r, r)] = cr(same);
        m[(d + r, d + r)] = cr(same);
        m[(r, d + r)] = cr(cross);
        m[(d + r, r)] = cr(cross);
    }
    m
}

/// Method-of-images heat kernel of `D_I²` for the pair `(Ps, 1 − Ps)`.
pub fn heat_kernel_images(d: usize, t: f64, x: f64, y: f64) -> Result<CMat> {
    if t <= 0.0 {
        return Err(Error::Domain { value: t, domain: "t > 0" });
    }
    let (a, b) = images_blocks(t, x, y, periodic_heat);
    Ok(assemble_ps_blocks(d, a, b))
}

/// `∂_x` of [`heat_kernel_images`].
pub fn heat_kernel_images_dx(d: usize, t: f64, x: f64, y: f64) -> Result<CMat> {
    if t <= 0.0 {
        return Err(Error::Domain { value: t, domain: "t > 0" });
    }
    let (a, b) = images_blocks(t, x, y, periodic_heat_dz);
    Ok(assemble_ps_blocks(d, a, b))
}

/// Spectral heat kernel `Σ_{j,k} e^{−tλ²} f_{j,k}(x) f_{j,k}(y)*`.
///
/// Fails with [`Error::TruncationInsufficient`] when the modes at the cutoff
/// still carry weight above [`TRUNCATION_TOL`].
pub fn heat_kernel_spectral(spec: &IntervalSpectrum, t: f64, x: f64, y: f64) -> Result<CMat> {
    if t <= 0.0 {
        return Err(Error::Domain { value: t, domain: "t > 0" });
    }
    let tail = (-t * spec.edge_lambda().powi(2)).exp();
    if tail >= TRUNCATION_TOL {
        return Err(Error::TruncationInsufficient { tail, tol: TRUNCATION_TOL });
    }
    let d = spec.d();
    let mut k = DMatrix::zeros(2 * d, 2 * d);
    for m in spec.modes() {
        let l = spec.lambda(m.j, m.k);
        let wgt = (-t * l * l).exp();
        if wgt == 0.0 {
            continue;
        }
        let fx = eigenfunction(spec, m.j, m.k, x)?;
        let fy = eigenfunction(spec, m.j, m.k, y)?;
        k += fx * fy.adjoint() * cr(wgt);
    }
    Ok(k)
}

/// Direct mode sum `Σ_{|k|≤K} λ e^{−tλ²}` for one branch.
pub fn heat_trace_branch_direct(theta: f64, t: f64, k_max: usize) -> f64 {
    let kk = k_max as i64;
    // Pair k and the mirrored index so that near-cancelling terms meet early.
    compensated_sum((-kk..=kk).map(|k| {
        let l = theta / 2.0 - PI * k as f64;
        l * (-t * l * l).exp()
    }))
}

/// Poisson-resummed representation of the full lattice sum for one branch:
/// `Σ_k λ_k e^{−tλ_k²} = 2 t^{−3/2} π^{−1/2} Σ_{n≥1} n sin(nθ) e^{−n²/t}`.
pub fn heat_trace_branch_poisson(theta: f64, t: f64) -> f64 {
    let pref = 2.0 / (t.powf(1.5) * PI.sqrt());
    let mut terms = Vec::new();
    let mut n = 1.0f64;
    loop {
        let e = (-n * n / t).exp();
        terms.push(n * (n * theta).sin() * e);
        if n * e < 1e-18 * (1.0 + terms[0].abs()) || n > 1e6 {
            break;
        }
        n += 1.0;
    }
    pref * compensated_sum(terms)
}

/// `Tr D_I e^{−tD_I²}` for one branch, switching representation at [`T_SWITCH`].
pub fn heat_trace_branch(theta: f64, t: f64, k_max: usize) -> f64 {
    if t >= T_SWITCH {
        heat_trace_branch_direct(theta, t, k_max)
    } else {
        heat_trace_branch_poisson(theta, t)
    }
}

/// `Tr D_I e^{−tD_I²}` summed over all branches of the spectrum.
pub fn heat_trace_d(spec: &IntervalSpectrum, t: f64) -> f64 {
    compensated_sum(spec.branches.iter().map(|b| heat_trace_branch(b.theta, t, spec.k_max)))
}

/// Closed-form branch eta-invariant `1 − θ/π`.
pub fn eta_scalar(theta: f64, tol: &Tol) -> Result<f64> {
    if !(theta > tol.branch && theta < 2.0 * PI - tol.branch) {
        return Err(Error::Domain { value: theta, domain: "(branch_tol, 2π − branch_tol)" });
    }
    Ok(1.0 - theta / PI)
}

/// Numeric branch eta-invariant
/// `(1/√π)∫₀^∞ t^{−1/2} Tr D e^{−tD²} dt = (2/√π)∫₀^∞ Tr(s²) ds`.
///
/// The `s`-integral is split at `√T_SWITCH` (Poisson representation below,
/// direct mode sum with `k_max` modes above) and truncated at `S` with
/// `e^{−S²λ_min²} < 1e−14`.
pub fn eta_scalar_numeric(theta: f64, k_max: usize) -> f64 {
    let lmin = (theta / 2.0).min(PI - theta / 2.0);
    let s_max = ((1.0 / TRUNCATION_TOL).ln()).sqrt() / lmin;
    let s_sw = T_SWITCH.sqrt().min(s_max);
    let f_small = |s: f64| if s <= 0.0 { 0.0 } else { heat_trace_branch_poisson(theta, s * s) };
    let f_large = |s: f64| heat_trace_branch_direct(theta, s * s, k_max);
    let lo = adaptive(&f_small, 0.0, s_sw, 1e-12, 1e-14, 30);
    let hi = if s_max > s_sw { adaptive(&f_large, s_sw, s_max, 1e-12, 1e-14, 30) } else { 0.0 };
    2.0 / PI.sqrt() * (lo + hi)
}

/// How the eta-invariant is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    /// `Σ_j (1 − θ_j/π)`.
    ClosedForm,
    /// Quadrature of the heat trace.
    Numeric,
}

/// Eta-invariant of the pair `(P₀, P₁)`.
pub fn eta_invariant(p0: &LagrangianProjection<f64>, p1: &LagrangianProjection<f64>, mode: EtaMode, tol: &Tol) -> Result<f64> {
    let spec = spectrum(p0, p1, DEFAULT_K, tol)?;
    eta_of_spectrum(&spec, mode, tol)
}

/// Eta-invariant from spectral data.
pub fn eta_of_spectrum(spec: &IntervalSpectrum, mode: EtaMode, tol: &Tol) -> Result<f64> {
    match mode {
        EtaMode::ClosedForm => {
            let parts: Result<Vec<f64>> = spec.branches.iter().map(|b| eta_scalar(b.theta, tol)).collect();
            Ok(compensated_sum(parts?))
        }
        EtaMode::Numeric => {
            let parts: Vec<f64> = spec.branches.par_iter().map(|b| eta_scalar_numeric(b.theta, spec.k_max)).collect();
            Ok(compensated_sum(parts))
        }
    }
}

/// Eta-invariant of the circle operator on the bundle twisted by `u`:
/// `Σ_j (1 − θ_j/π)` over the phases of `u`.
pub fn circle_eta(u: &CMat, tol: &Tol) -> Result<f64> {
    let b = branches_of(u, tol)?;
    Ok(compensated_sum(b.iter().map(|b| 1.0 - b.theta / PI)))
}
