//! Scalar abstraction for the dense linear-algebra layer.

use nalgebra::{DMatrix, RealField};
use num_complex::Complex;
use num_traits::FromPrimitive;

/// Real floating-point type usable by the matrix layer (`f32` or `f64`).
///
/// The bound deliberately avoids `num_traits::Float` so that the method
/// namespace of `RealField` stays unambiguous in generic code.
pub trait Scalar: RealField + FromPrimitive + Copy + Default + Send + Sync + 'static {
    /// Convert an `f64` literal into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }
    /// Lossy conversion back to `f64` for reporting.
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn to_f64(self) -> f64 {
        self
    }
}

/// Complex number over a [`Scalar`].
pub type C<T> = Complex<T>;

/// Dense square complex matrix over a [`Scalar`].
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Numerical tolerances gating the matrix predicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Residual tolerance for hermitian / unitary / projection predicates.
    pub mat: T,
    /// Relative reconstruction tolerance (multiplied by the input norm).
    pub recon: T,
    /// Eigenvalues with magnitude below this count as zero.
    pub gap: T,
    /// Invertibility threshold on `σ_min / σ_max`.
    pub cond: T,
    /// Minimal distance of a unit-circle eigenvalue from the branch cut at 1.
    pub branch: T,
}

impl<T: Scalar> Tolerances<T> {
    /// Tolerances scaled to the machine epsilon of `T`.
    ///
    /// For `f64` this reproduces [`Tolerances::default`]; for `f32` the
    /// thresholds are loosened proportionally to the larger epsilon.
    pub fn for_precision() -> Self {
        let scale = T::default_epsilon().to_f64() / f64::EPSILON;
        let s = |x: f64| T::lit((x * scale).min(1e-2));
        Tolerances { mat: s(1e-10), recon: s(1e-10), gap: s(1e-8), cond: s(1e-10), branch: s(1e-8) }
    }
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Self::for_precision()
    }
}
