//! Fuchsian systems `dY/dx = Σ Qⱼ/(x − tⱼ)·Y` in the complex domain: monodromy by
//! analytic continuation, normalized local solutions at the poles, the
//! Schlesinger flow with its τ-function, and rational solutions built from
//! projector factors.
//!
//! Everything is generic over the real scalar (`f32` or `f64`); the aliases
//! below fix `f64`.

pub mod error;
pub mod frobenius;
pub mod fuchsian;
pub mod infinity;
pub mod linalg;
pub mod ode;
pub mod path;
pub mod rational;
pub mod sample;
pub mod scalar;
pub mod schlesinger;
pub mod tau;

pub use error::{Error, Result};
pub use fuchsian::{FuchsianSystem, ResonanceReport};
pub use linalg::*;
pub use scalar::{Real, C};

/// Double-precision complex scalar.
pub type Cplx = C<f64>;
/// Double-precision matrix.
pub type Matrix = ComplexMatrix<f64>;
/// Single-precision matrix.
pub type Matrix32 = ComplexMatrix<f32>;
