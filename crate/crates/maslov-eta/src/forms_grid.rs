//! Matrix-valued differential forms sampled on product parameter grids, with
//! the exterior derivative (second-order finite differences), the graded
//! wedge product, traces, integration and the Chern character form.
//!
//! A form on a grid of dimension `n` stores one component per coordinate
//! subset `I ⊂ {0..n}` (encoded as a bitmask, increasing index order), i.e.
//! `F = Σ_I F_I dx^I` with `dx^I = dx^{i₁} ∧ … ∧ dx^{i_k}`, `i₁ < … < i_k`.
//! Integration of a top-degree form is `∫ F_{0…n−1} dx⁰…dx^{n−1}` over the
//! coordinate domain, which is the invariant integral of the form.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkernel::{self, cr};
use crate::quadrature::compensated_sum;
use crate::{CMat, Complex64};

/// Shape of a base grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// A single point (dimension 0).
    Point,
    /// `ℝ/2πℤ`.
    Circle,
    /// `(ℝ/2πℤ)²`.
    Torus,
    /// The sphere in coordinates `(φ, ψ) ∈ [0, π] × [0, 2π)`.
    SphereRect,
    /// `SphereRect × ℝ/2πℤ`, coordinates `(φ, ψ, χ)`; used for closedness
    /// checks of 2-forms, which need a third direction.
    SphereCircle,
}

/// One coordinate axis of a product grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    /// Number of nodes.
    pub n: usize,
    /// Lower end of the coordinate interval.
    pub lo: f64,
    /// Upper end of the coordinate interval.
    pub hi: f64,
    /// Periodic axes wrap indices; non-periodic axes use cell-centred nodes
    /// and one-sided second-order stencils at the ends.
    pub periodic: bool,
}

impl Axis {
    /// Node spacing.
    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    /// Coordinate of node `i`.
    pub fn coord(&self, i: usize) -> f64 {
        if self.periodic {
            self.lo + i as f64 * self.h()
        } else {
            self.lo + (i as f64 + 0.5) * self.h()
        }
    }
}

/// Product grid over the base of a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseGrid {
    /// Grid shape.
    pub kind: GridKind,
    /// Coordinate axes (empty for a point).
    pub axes: Vec<Axis>,
}

impl BaseGrid {
    /// Single-point base.
    pub fn point() -> Self {
        BaseGrid { kind: GridKind::Point, axes: vec![] }
    }

    /// Circle with `n` nodes.
    pub fn circle(n: usize) -> Self {
        BaseGrid { kind: GridKind::Circle, axes: vec![periodic_axis(n)] }
    }

    /// Torus with `n0 × n1` nodes.
    pub fn torus(n0: usize, n1: usize) -> Self {
        BaseGrid { kind: GridKind::Torus, axes: vec![periodic_axis(n0), periodic_axis(n1)] }
    }

    /// Sphere coordinate rectangle with `n_phi × n_psi` nodes.
    pub fn sphere_rect(n_phi: usize, n_psi: usize) -> Self {
        BaseGrid { kind: GridKind::SphereRect, axes: vec![Axis { n: n_phi, lo: 0.0, hi: PI, periodic: false }, periodic_axis(n_psi)] }
    }

    /// Sphere × circle with `n_phi × n_psi × n_chi` nodes.
    pub fn sphere_circle(n_phi: usize, n_psi: usize, n_chi: usize) -> Self {
        BaseGrid {
            kind: GridKind::SphereCircle,
            axes: vec![Axis { n: n_phi, lo: 0.0, hi: PI, periodic: false }, periodic_axis(n_psi), periodic_axis(n_chi)],
        }
    }

    /// Build from a kind and node counts (one per axis).
    pub fn from_kind(kind: GridKind, sizes: &[usize]) -> Result<Self> {
        let need = match kind {
            GridKind::Point => 0,
            GridKind::Circle => 1,
            GridKind::Torus | GridKind::SphereRect => 2,
            GridKind::SphereCircle => 3,
        };
        if sizes.len() != need {
            return Err(Error::Precondition(format!("{kind:?} grid needs {need} sizes, got {}", sizes.len())));
        }
        let min = if kind == GridKind::Point { 0 } else { 3 };
        if sizes.iter().any(|&n| n < min) {
            return Err(Error::Precondition("every grid axis needs at least 3 nodes".into()));
        }
        Ok(match kind {
            GridKind::Point => Self::point(),
            GridKind::Circle => Self::circle(sizes[0]),
            GridKind::Torus => Self::torus(sizes[0], sizes[1]),
            GridKind::SphereRect => Self::sphere_rect(sizes[0], sizes[1]),
            GridKind::SphereCircle => Self::sphere_circle(sizes[0], sizes[1], sizes[2]),
        })
    }

    /// Dimension of the base.
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Node counts per axis.
    pub fn sizes(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    /// `true` for grids without nodes (never produced by the constructors).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of a linear node index (last axis fastest).
    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = k % self.axes[a].n;
            k /= self.axes[a].n;
        }
        idx
    }

    /// Linear index of a multi-index.
    pub fn linear(&self, idx: &[usize]) -> usize {
        let mut k = 0;
        for (a, &i) in idx.iter().enumerate() {
            k = k * self.axes[a].n + i;
        }
        k
    }

    /// Coordinates of a node.
    pub fn coords(&self, k: usize) -> Vec<f64> {
        self.multi_index(k).iter().enumerate().map(|(a, &i)| self.axes[a].coord(i)).collect()
    }

    /// Coordinate-measure weight of every node (product midpoint / trapezoid
    /// rule); the weights sum to the coordinate-domain measure.
    pub fn weights(&self) -> Vec<f64> {
        let w: f64 = self.axes.iter().map(|a| a.h()).product();
        vec![w; self.len()]
    }

    /// Riemannian area weights: the coordinate weights times `sin φ` on
    /// sphere grids (for integrating functions rather than forms).
    pub fn area_weights(&self) -> Vec<f64> {
        let mut w = self.weights();
        if matches!(self.kind, GridKind::SphereRect | GridKind::SphereCircle) {
            for (k, wk) in w.iter_mut().enumerate() {
                *wk *= self.coords(k)[0].sin();
            }
        }
        w
    }

    /// Total coordinate-domain measure.
    pub fn measure(&self) -> f64 {
        self.axes.iter().map(|a| a.hi - a.lo).product()
    }

    /// Centered second-order difference stencil along `axis` at node `k`:
    /// a list of `(node, coefficient)` pairs.
    pub fn stencil(&self, k: usize, axis: usize) -> Vec<(usize, f64)> {
        let ax = &self.axes[axis];
        let h = ax.h();
        let mut idx = self.multi_index(k);
        let i = idx[axis];
        let n = ax.n;
        let mut at = |j: usize| {
            idx[axis] = j;
            self.linear(&idx)
        };
        if ax.periodic {
            vec![(at((i + 1) % n), 0.5 / h), (at((i + n - 1) % n), -0.5 / h)]
        } else if i == 0 {
            vec![(at(0), -1.5 / h), (at(1), 2.0 / h), (at(2), -0.5 / h)]
        } else if i == n - 1 {
            vec![(at(n - 1), 1.5 / h), (at(n - 2), -2.0 / h), (at(n - 3), 0.5 / h)]
        } else {
            vec![(at(i + 1), 0.5 / h), (at(i - 1), -0.5 / h)]
        }
    }
}

fn periodic_axis(n: usize) -> Axis {
    Axis { n, lo: 0.0, hi: 2.0 * PI, periodic: true }
}

/// Degree of a component mask.
pub fn mask_degree(mask: usize) -> usize {
    mask.count_ones() as usize
}

/// Koszul sign of `dx^S ∧ dx^T` relative to the sorted `dx^{S∪T}`.
fn koszul(s: usize, t: usize) -> f64 {
    let mut inv = 0;
    for a in 0..usize::BITS as usize {
        if s >> a & 1 == 1 {
            // elements of T smaller than a must move past a
            inv += (t & ((1usize << a) - 1)).count_ones();
        }
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Matrix-valued differential form sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFormField {
    /// Base grid.
    pub grid: BaseGrid,
    /// Matrix size of the values.
    pub m: usize,
    /// `components[mask]` holds one matrix per node, or `None` if the
    /// component is absent (identically zero).
    pub components: Vec<Option<Vec<CMat>>>,
}

impl MatrixFormField {
    /// The zero form.
    pub fn zero(grid: &BaseGrid, m: usize) -> Self {
        MatrixFormField { grid: grid.clone(), m, components: vec![None; 1 << grid.dim()] }
    }

    /// Degree-0 form from node values.
    pub fn from_deg0(grid: &BaseGrid, values: Vec<CMat>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!("expected {} node values, got {}", grid.len(), values.len())));
        }
        let m = values.first().map(|v| v.nrows()).unwrap_or(1);
        let mut f = Self::zero(grid, m);
        f.components[0] = Some(values);
        Ok(f)
    }

    /// Scalar (1×1) form with a single component.
    pub fn scalar_component(grid: &BaseGrid, mask: usize, values: &[Complex64]) -> Result<Self> {
        if mask >= 1 << grid.dim() {
            return Err(Error::DegreeMismatch(format!("component mask {mask:#b} exceeds grid dimension {}", grid.dim())));
        }
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!("expected {} node values, got {}", grid.len(), values.len())));
        }
        let mut f = Self::zero(grid, 1);
        f.components[mask] = Some(values.iter().map(|&z| DMatrix::from_element(1, 1, z)).collect());
        Ok(f)
    }

    /// Component for a mask, if present.
    pub fn component(&self, mask: usize) -> Option<&Vec<CMat>> {
        self.components.get(mask).and_then(|c| c.as_ref())
    }

    /// Scalar values of a 1×1 component (zeros if absent).
    pub fn scalar_values(&self, mask: usize) -> Vec<Complex64> {
        match self.component(mask) {
            Some(c) => c.iter().map(|m| m[(0, 0)]).collect(),
            None => vec![Complex64::new(0.0, 0.0); self.grid.len()],
        }
    }

    fn add_into(&mut self, mask: usize, vals: Vec<CMat>) {
        match &mut self.components[mask] {
            Some(c) => c.par_iter_mut().zip(vals.par_iter()).for_each(|(a, b)| *a += b),
            slot @ None => *slot = Some(vals),
        }
    }

    /// Sum of two forms on the same grid.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (mask, c) in other.components.iter().enumerate() {
            if let Some(c) = c {
                out.add_into(mask, c.clone());
            }
        }
        Ok(out)
    }

    /// Multiply every component by a complex scalar.
    pub fn scale(&self, z: Complex64) -> Self {
        let mut out = self.clone();
        for c in out.components.iter_mut().flatten() {
            c.par_iter_mut().for_each(|m| *m *= z);
        }
        out
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Precondition("forms live on different grids".into()));
        }
        if self.m != other.m {
            return Err(Error::Precondition(format!("matrix sizes differ ({} vs {})", self.m, other.m)));
        }
        Ok(())
    }

    /// Largest entry magnitude over all components and nodes.
    pub fn sup_norm(&self) -> f64 {
        self.components.iter().flatten().flat_map(|c| c.iter()).flat_map(|m| m.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry magnitude over the components of one degree.
    pub fn sup_norm_degree(&self, degree: usize) -> f64 {
        self.components
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask_degree(*mask) == degree)
            .filter_map(|(_, c)| c.as_ref())
            .flat_map(|c| c.iter())
            .flat_map(|m| m.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Partial derivative of node values along an axis.
pub fn partial(grid: &BaseGrid, values: &[CMat], axis: usize) -> Vec<CMat> {
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let mut acc = DMatrix::zeros(values[k].nrows(), values[k].ncols());
            for (j, c) in grid.stencil(k, axis) {
                acc += &values[j] * cr(c);
            }
            acc
        })
        .collect()
}

/// Exterior derivative by centered second-order differences.
pub fn ext_d(f: &MatrixFormField) -> Result<MatrixFormField> {
    let n = f.grid.dim();
    if n == 0 {
        return Err(Error::DegreeMismatch("exterior derivative on a zero-dimensional grid".into()));
    }
    let mut out = MatrixFormField::zero(&f.grid, f.m);
    for (mask, comp) in f.components.iter().enumerate() {
        let Some(comp) = comp else { continue };
        for a in 0..n {
            if mask >> a & 1 == 1 {
                continue;
            }
            let sign = koszul(1 << a, mask);
            let mut der = partial(&f.grid, comp, a);
            if sign < 0.0 {
                der.par_iter_mut().for_each(|m| *m = -m.clone());
            }
            out.add_into(mask | 1 << a, der);
        }
    }
    Ok(out)
}

/// Graded wedge product (pointwise matrix product with Koszul signs).
pub fn wedge(f: &MatrixFormField, g: &MatrixFormField) -> Result<MatrixFormField> {
    f.check_compatible(g)?;
    let mut out = MatrixFormField::zero(&f.grid, f.m);
    for (s, fs) in f.components.iter().enumerate() {
        let Some(fs) = fs else { continue };
        for (t, gt) in g.components.iter().enumerate() {
            let Some(gt) = gt else { continue };
            if s & t != 0 {
                continue;
            }
            let sign = cr(koszul(s, t));
            let prod: Vec<CMat> = fs.par_iter().zip(gt.par_iter()).map(|(a, b)| a * b * sign).collect();
            out.add_into(s | t, prod);
        }
    }
    Ok(out)
}

/// Pointwise product of a degree-0 matrix field with a form (`P·F`).
pub fn left_multiply(p: &[CMat], f: &MatrixFormField) -> MatrixFormField {
    let mut out = f.clone();
    for c in out.components.iter_mut().flatten() {
        c.par_iter_mut().zip(p.par_iter()).for_each(|(m, pk)| *m = pk * &*m);
    }
    out
}

/// Nodewise matrix trace (result is scalar-valued, 1×1).
pub fn trace_field(f: &MatrixFormField) -> MatrixFormField {
    let mut out = MatrixFormField::zero(&f.grid, 1);
    for (mask, c) in f.components.iter().enumerate() {
        if let Some(c) = c {
            out.components[mask] = Some(c.par_iter().map(|m| DMatrix::from_element(1, 1, m.trace())).collect());
        }
    }
    out
}

/// Integrate the trace of the degree-`degree` component; `degree` must equal
/// the grid dimension.
pub fn integrate(f: &MatrixFormField, degree: usize) -> Result<Complex64> {
    let n = f.grid.dim();
    if degree != n {
        return Err(Error::DegreeMismatch(format!("cannot integrate a degree-{degree} form over a {n}-dimensional grid")));
    }
    let top = (1usize << n) - 1;
    let Some(c) = f.component(top) else { return Ok(Complex64::new(0.0, 0.0)) };
    let w = f.grid.weights();
    let re = compensated_sum(c.iter().zip(&w).map(|(m, w)| m.trace().re * w));
    let im = compensated_sum(c.iter().zip(&w).map(|(m, w)| m.trace().im * w));
    Ok(Complex64::new(re, im))
}

/// Chern character form `tr P − tr P(dP)²` (degrees 0 and 2) of a
/// projection-valued degree-0 field, returned scalar-valued.
pub fn chern_character(p: &MatrixFormField, tol_mat: f64) -> Result<MatrixFormField> {
    let Some(vals) = p.component(0) else {
        return Err(Error::DegreeMismatch("Chern character needs a degree-0 projection field".into()));
    };
    if let Some(bad) = vals.iter().position(|m| !matkernel::is_projection(m, tol_mat)) {
        return Err(Error::Precondition(format!("value at node {:?} is not a projection", p.grid.multi_index(bad))));
    }
    let p0 = MatrixFormField::from_deg0(&p.grid, vals.clone())?;
    let mut out = trace_field(&p0);
    if p.grid.dim() >= 2 {
        let dp = ext_d(&p0)?;
        let dpdp = wedge(&dp, &dp)?;
        let mut two = left_multiply(vals, &dpdp);
        // keep only the degree-2 part
        for (mask, c) in two.components.iter_mut().enumerate() {
            if mask_degree(mask) != 2 {
                *c = None;
            }
        }
        out = out.add(&trace_field(&two).scale(Complex64::new(-1.0, 0.0)))?;
    }
    Ok(out)
}

/// JSON-friendly snapshot of a form field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    /// Grid metadata.
    pub grid: BaseGrid,
    /// Matrix size.
    pub matrix_dim: usize,
    /// Present components.
    pub components: Vec<ComponentSnapshot>,
}

/// One stored component of a [`FieldSnapshot`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSnapshot {
    /// Coordinate indices of the component (increasing).
    pub indices: Vec<usize>,
    /// Entries as `[re, im]` pairs: node-major, then row-major matrix entries.
    pub data: Vec<[f64; 2]>,
}

impl MatrixFormField {
    /// Snapshot for serialisation.
    pub fn snapshot(&self) -> FieldSnapshot {
        let components = self
            .components
            .iter()
            .enumerate()
            .filter_map(|(mask, c)| {
                c.as_ref().map(|c| ComponentSnapshot {
                    indices: (0..self.grid.dim()).filter(|a| mask >> a & 1 == 1).collect(),
                    data: c.iter().flat_map(|m| (0..m.nrows()).flat_map(move |r| (0..m.ncols()).map(move |s| [m[(r, s)].re, m[(r, s)].im]))).collect(),
                })
            })
            .collect();
        FieldSnapshot { grid: self.grid.clone(), matrix_dim: self.m, components }
    }

    /// Rebuild a field from a snapshot.
    pub fn from_snapshot(s: &FieldSnapshot) -> Result<Self> {
        let mut f = Self::zero(&s.grid, s.matrix_dim);
        let mm = s.matrix_dim * s.matrix_dim;
        for c in &s.components {
            let mask = c.indices.iter().fold(0usize, |acc, &a| acc | 1 << a);
            if mask >= f.components.len() || c.data.len() != mm * s.grid.len() {
                return Err(Error::Precondition("snapshot component does not match its grid".into()));
            }
            let vals = c.data.chunks(mm).map(|ch| DMatrix::from_row_iterator(s.matrix_dim, s.matrix_dim, ch.iter().map(|p| Complex64::new(p[0], p[1])))).collect();
            f.components[mask] = Some(vals);
        }
        Ok(f)
    }

    /// Binary export: little-endian `(re, im)` pairs of 64-bit floats in the
    /// snapshot order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let s = self.snapshot();
        let mut out = Vec::new();
        for c in &s.components {
            for p in &c.data {
                out.extend_from_slice(&p[0].to_le_bytes());
                out.extend_from_slice(&p[1].to_le_bytes());
            }
        }
        out
    }
}
