//! Noncommutative Maslov indices, spectra and heat kernels of the interval
//! Dirac operator with Lagrangian boundary conditions, and eta-forms of the
//! associated superconnections over parameter grids.
//!
//! Module map:
//!
//! * [`matkernel`] — dense complex-matrix numerics (eigendecompositions,
//!   branch-cut logarithm, spectral projections).
//! * [`lagrangian`] — Lagrangian projections, Cayley transform,
//!   standardisation of pairs, unitary boundary paths.
//! * [`maslov`] — the Maslov index of a triple and its family version.
//! * [`interval_dirac`] — spectrum, eigenfunctions, heat kernels and
//!   eta-invariants of `D_I = I₀ d/dx` on `[0, 1]`; the circle operator.
//! * [`forms_grid`] — matrix-valued differential forms on parameter grids and
//!   the Chern character form.
//! * [`eta_engine`] — superconnection curvature, Volterra traces and the
//!   degree-0/degree-2 eta-form over a grid.
//!
//! The dense linear-algebra layer (`matkernel`, `lagrangian`, `maslov`) is
//! generic over the real scalar ([`Scalar`], implemented for `f32` and
//! `f64`); the spectral and form layers work in `f64`, whose tolerances they
//! are calibrated against. The aliases below fix the scalar to `f64`.

pub mod error;
pub mod eta_engine;
pub mod families;
pub mod forms_grid;
pub mod interval_dirac;
pub mod lagrangian;
pub mod maslov;
pub mod matkernel;
pub mod quadrature;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Scalar, Tolerances};

/// Complex `f64`.
pub type Complex64 = num_complex::Complex<f64>;
/// Dense complex `f64` matrix.
pub type CMat = scalar::CMatrix<f64>;
/// `f64` Lagrangian projection.
pub type Lagrangian = lagrangian::LagrangianProjection<f64>;
/// `f64` standardised pair.
pub type Pair = lagrangian::StandardizedPair<f64>;
/// `f64` tolerances.
pub type Tol = Tolerances<f64>;
