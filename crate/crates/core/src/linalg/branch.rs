//! Nonzero complex numbers with a continuously tracked argument, and the
//! branched matrix power `z^Q = exp(Q·ln z)` built on them.

use num_traits::Zero;

use super::expm::matrix_exp;
use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};
use crate::scalar::{cplx, Real, C};

/// A point of the Riemann surface of the logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchedBase<T> {
    value: C<T>,
    arg: T,
}

impl<T: Real> BranchedBase<T> {
    /// Principal branch, `arg ∈ (−π, π]`.
    pub fn new(value: C<T>) -> Result<Self> {
        if value.is_zero() {
            return Err(Error::ZeroBase);
        }
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { value, arg: value.arg() })
    }

    /// Branch whose argument is the representative of `arg(value)` nearest to `arg_hint`.
    pub fn with_arg(value: C<T>, arg_hint: T) -> Result<Self> {
        let mut b = Self::new(value)?;
        let tau = T::TAU();
        let k = ((arg_hint - b.arg) / tau).round();
        b.arg = b.arg + k * tau;
        Ok(b)
    }

    pub fn value(&self) -> C<T> {
        self.value
    }

    pub fn arg(&self) -> T {
        self.arg
    }

    /// Full turns relative to the principal branch.
    pub fn sheet(&self) -> i64 {
        ((self.arg - self.value.arg()) / T::TAU()).round().to_i64().unwrap_or(0)
    }

    /// `ln|z| + i·arg z`
    pub fn ln(&self) -> C<T> {
        cplx(self.value.norm().ln(), self.arg)
    }

    /// Moves continuously to `next`, assuming the straight segment from the
    /// current value does not pass through the origin.
    pub fn advance_to(&self, next: C<T>) -> Result<Self> {
        if next.is_zero() {
            return Err(Error::ZeroBase);
        }
        let step = (next / self.value).arg();
        Ok(Self { value: next, arg: self.arg + step })
    }

    /// Same value, `turns` counterclockwise turns further around the origin.
    pub fn rotate(&self, turns: i64) -> Self {
        Self { value: self.value, arg: self.arg + T::TAU() * T::from_i64(turns).unwrap_or_else(T::zero) }
    }
}

/// `z^Q = exp(Q·(ln|z| + i·arg z))`.
pub fn power_base<T: Real>(base: &BranchedBase<T>, q: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    matrix_exp(&q.scale(base.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm::exp_two_pi_i;
    use num_complex::Complex;

    type M = ComplexMatrix<f64>;

    #[test]
    fn zero_base_rejected() {
        assert_eq!(BranchedBase::<f64>::new(Complex::zero()), Err(Error::ZeroBase));
    }

    #[test]
    fn polar_reconstruction() {
        let z = Complex::new(-0.3, 0.7);
        let b = BranchedBase::with_arg(z, 20.0).unwrap();
        let back = Complex::from_polar(z.norm(), b.arg());
        assert!((back - z).norm() < 1e-12);
        assert_eq!(b.sheet(), 3);
    }

    #[test]
    fn winding_accumulates() {
        let mut b = BranchedBase::new(Complex::new(1.0, 0.0)).unwrap();
        for i in 1..=64 {
            let th = std::f64::consts::TAU * i as f64 / 64.0;
            b = b.advance_to(Complex::from_polar(1.0, th)).unwrap();
        }
        assert!((b.arg() - std::f64::consts::TAU).abs() < 1e-12);
        assert_eq!(b.sheet(), 1);
    }

    #[test]
    fn zero_exponent() {
        let b = BranchedBase::new(Complex::new(2.0, 1.0)).unwrap();
        assert!(power_base(&b, &M::zeros(2)).unwrap().distance(&M::identity(2)) < 1e-15);
    }

    #[test]
    fn diagonal_projector() {
        let b = BranchedBase::new(Complex::new(3.5, 0.0)).unwrap();
        let q = M::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let p = power_base(&b, &q).unwrap();
        assert!(p.distance(&M::from_real_rows(&[vec![3.5, 0.0], vec![0.0, 1.0]]).unwrap()) < 1e-13);
    }

    #[test]
    fn turn_multiplies_on_the_right() {
        let q = M::from_real_rows(&[vec![0.3, 1.0], vec![0.2, -0.45]]).unwrap();
        let b = BranchedBase::new(Complex::new(0.4, -1.1)).unwrap();
        let lhs = power_base(&b.rotate(1), &q).unwrap();
        let rhs = power_base(&b, &q).unwrap().matmul(&exp_two_pi_i(&q).unwrap());
        assert!(lhs.distance(&rhs) < 1e-10 * rhs.norm_fro());
    }

    #[test]
    fn differentiation_rule() {
        // d/dz z^Q = Q z^Q / z
        let q = M::from_real_rows(&[vec![0.3, 1.0], vec![0.2, -0.45]]).unwrap();
        let z = Complex::new(0.8, 0.6);
        let h = 1e-6;
        let p = |w| power_base(&BranchedBase::new(w).unwrap(), &q).unwrap();
        let fd = (p(z + h) - p(z - h)).scale_real(0.5 / h);
        let exact = q.matmul(&p(z)).scale(Complex::new(1.0, 0.0) / z);
        assert!(fd.distance(&exact) < 1e-8);
    }
}
