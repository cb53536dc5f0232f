//! The solution normalized by `Y(∞) = I` for zero-sum systems, and the
//! coefficient `Y₋₁` of its expansion `Y = I + Y₋₁/x + …`.
//!
//! With `w = 1/x` the system reads `dŶ/dw = −Σ tᵢQᵢ/(1 − tᵢw)·Ŷ`, regular at `w = 0`.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fuchsian::FuchsianSystem;
use crate::linalg::ComplexMatrix;
use crate::ode::{integrate, OdeOptions};
use crate::scalar::{Real, C};

/// Points closer than this fraction of `max|tᵢ|` to the pole disk are refused.
const OUTER_MARGIN: f64 = 1.05;

fn require_zero_sum<T: Real>(system: &FuchsianSystem<T>) -> Result<()> {
    let s = system.residue_sum().norm_fro();
    let scale = system.max_residue_norm().max(T::one());
    if s > T::tol(1e-10) * scale {
        return Err(Error::ZeroSumViolated { residual: s.as_f64() });
    }
    Ok(())
}

fn outer_radius<T: Real>(system: &FuchsianSystem<T>) -> T {
    system.poles().iter().map(|t| t.norm()).fold(T::zero(), T::max)
}

/// `Y(x)` with `Y(∞) = I`, for `|x| > 1.05·max|tᵢ|`.
pub fn solution_at_infinity<T: Real>(system: &FuchsianSystem<T>, x: C<T>, tol: T) -> Result<ComplexMatrix<T>> {
    require_zero_sum(system)?;
    let r = outer_radius(system);
    if x.norm() <= r * T::lit(OUTER_MARGIN) {
        return Err(Error::Precondition(format!(
            "|x| = {:e} must exceed {:e} (outside the pole disk)",
            x.norm().as_f64(),
            (r * T::lit(OUTER_MARGIN)).as_f64()
        )));
    }
    let (j, d) = system.nearest_pole(x);
    if d <= system.min_gap() * T::lit(1e-3) {
        return Err(Error::AtPole { pole: j, distance: d.as_f64() });
    }
    let k = system.dim();
    let w1 = C::<T>::one() / x;
    let weighted: Vec<(C<T>, ComplexMatrix<T>)> =
        system.poles().iter().zip(system.residues()).map(|(t, q)| (*t, q.scale(*t))).collect();
    let rhs = |s: T, y: &[C<T>], dy: &mut [C<T>]| -> Result<()> {
        let w = w1 * s;
        let mut a = ComplexMatrix::zeros(k);
        for (t, tq) in &weighted {
            a = a.axpy(-(w1 / (C::<T>::one() - *t * w)), tq);
        }
        for i in 0..k {
            for jj in 0..k {
                let mut acc = C::<T>::zero();
                for m in 0..k {
                    acc += a[(i, m)] * y[m * k + jj];
                }
                dy[i * k + jj] = acc;
            }
        }
        Ok(())
    };
    let y0 = ComplexMatrix::<T>::identity(k);
    let (end, _) = integrate(rhs, T::zero(), T::one(), y0.as_slice(), &OdeOptions::with_tol(tol), |_, _| {})?;
    let y = ComplexMatrix::from_row_major(k, end)?;
    if !y.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(y)
}

/// Trapezoid estimate of `Y₋₁ = (1/2πi)∮(Y − I)dx` with its error estimate.
#[derive(Clone, Debug)]
pub struct LaurentCoefficient<T> {
    pub y_minus_1: ComplexMatrix<T>,
    /// Difference between the `N` and `N/2` node rules.
    pub estimate: T,
    pub radius: T,
    pub nodes: usize,
}

/// Default contour: twice the pole disk radius, at least one unit of length scale.
pub fn default_contour_radius<T: Real>(system: &FuchsianSystem<T>) -> T {
    (T::lit(2.0) * outer_radius(system)).max(system.length_scale())
}

pub fn laurent_minus_one<T: Real>(
    system: &FuchsianSystem<T>,
    radius: T,
    nodes: usize,
    tol: T,
) -> Result<LaurentCoefficient<T>> {
    if nodes < 4 || nodes % 2 != 0 {
        return Err(Error::Precondition("node count must be even and at least 4".into()));
    }
    let k = system.dim();
    let vals: Vec<(C<T>, ComplexMatrix<T>)> = (0..nodes)
        .map(|m| {
            let x = Complex::from_polar(radius, T::TAU() * T::from_count(m) / T::from_count(nodes));
            solution_at_infinity(system, x, tol).map(|y| (x, y))
        })
        .collect::<Result<_>>()?;
    let rule = |step: usize| {
        let mut acc = ComplexMatrix::zeros(k);
        let mut count = 0usize;
        for (x, y) in vals.iter().step_by(step) {
            acc = acc + (y - &ComplexMatrix::identity(k)).scale(*x);
            count += 1;
        }
        acc.scale_real(T::one() / T::from_count(count))
    };
    let full = rule(1);
    let half = rule(2);
    let estimate = full.distance(&half);
    Ok(LaurentCoefficient { y_minus_1: full, estimate, radius, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = ComplexMatrix<f64>;

    fn c(re: f64, im: f64) -> C<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn scalar_closed_form() {
        let q = 0.3;
        let s = FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![M::scalar(1, c(q, 0.0)), M::scalar(1, c(-q, 0.0))])
            .unwrap();
        let x = c(2.5, 1.0);
        let y = solution_at_infinity(&s, x, 1e-12).unwrap();
        let exact = (x / (x - 1.0)).powf(q);
        assert!((y[(0, 0)] - exact).norm() < 1e-10);
        let l = laurent_minus_one(&s, 3.0, 32, 1e-12).unwrap();
        assert!((l.y_minus_1[(0, 0)] - c(q, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn zero_residues_give_identity() {
        let s = FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![M::zeros(2), M::zeros(2)]).unwrap();
        assert_eq!(solution_at_infinity(&s, c(5.0, 0.0), 1e-10).unwrap(), M::identity(2));
    }

    #[test]
    fn inside_disk_refused() {
        let s = FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![M::zeros(1), M::zeros(1)]).unwrap();
        assert!(solution_at_infinity(&s, c(0.5, 0.0), 1e-10).is_err());
    }
}
