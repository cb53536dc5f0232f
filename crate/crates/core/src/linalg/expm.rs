//! Matrix exponential by scaling and squaring around a truncated Taylor series.

use num_traits::Zero;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};
use crate::scalar::{re, Real};

/// `exp(A)`.
pub fn matrix_exp<T: Real>(a: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = a.dim();
    let norm = a.norm_one();
    if norm == T::zero() {
        return Ok(ComplexMatrix::identity(n));
    }
    // bring the norm under 1/2
    let half = T::lit(0.5);
    let mut s = 0u32;
    let mut scaled_norm = norm;
    while scaled_norm > half {
        scaled_norm = scaled_norm * half;
        s += 1;
        if s > 1100 {
            return Err(Error::Overflow { norm: norm.as_f64() });
        }
    }
    let scale = T::lit(0.5).powi(s as i32);
    let b = a.scale_real(scale);

    let mut sum = ComplexMatrix::identity(n);
    let mut term = ComplexMatrix::identity(n);
    let eps = T::epsilon();
    for m in 1..60 {
        term = term.matmul(&b).scale(re(T::one() / T::from_count(m)));
        sum += &term;
        if term.norm_one() <= eps * sum.norm_one() * T::lit(0.25) {
            break;
        }
    }
    for _ in 0..s {
        sum = sum.matmul(&sum);
        if !sum.is_finite() {
            return Err(Error::Overflow { norm: norm.as_f64() });
        }
    }
    Ok(sum)
}

/// `exp(2πi·A)`.
pub fn exp_two_pi_i<T: Real>(a: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    matrix_exp(&a.scale(crate::scalar::two_pi_i()))
}

/// Fréchet derivative `L(A, E)` of the exponential: the upper-right block of
/// `exp([[A, E], [0, A]])`.
pub fn exp_frechet<T: Real>(a: &ComplexMatrix<T>, e: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    a.check_same_dim(e)?;
    let n = a.dim();
    let big = ComplexMatrix::from_fn(2 * n, |i, j| match (i < n, j < n) {
        (true, true) => a[(i, j)],
        (true, false) => e[(i, j - n)],
        (false, false) => a[(i - n, j - n)],
        (false, true) => num_complex::Complex::zero(),
    });
    let x = matrix_exp(&big)?;
    Ok(ComplexMatrix::from_fn(n, |i, j| x[(i, j + n)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    type M = ComplexMatrix<f64>;

    #[test]
    fn zero_gives_identity() {
        assert_eq!(matrix_exp(&M::zeros(3)).unwrap(), M::identity(3));
    }

    #[test]
    fn diagonal() {
        let a = M::from_diag(&[Complex::new(1.5, 0.0), Complex::new(-0.25, 2.0)]);
        let e = matrix_exp(&a).unwrap();
        assert!((e[(0, 0)] - Complex::new(1.5f64, 0.0).exp()).norm() < 1e-13);
        assert!((e[(1, 1)] - Complex::new(-0.25f64, 2.0).exp()).norm() < 1e-13);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn integer_spectrum_is_identity() {
        let a = M::from_diag(&[Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)]);
        let e = exp_two_pi_i(&a).unwrap();
        assert!(e.distance(&M::identity(2)) < 1e-12);
    }

    #[test]
    fn nilpotent_is_exact() {
        let a = M::from_real_rows(&[vec![0.0, 3.0], vec![0.0, 0.0]]).unwrap();
        let e = matrix_exp(&a).unwrap();
        let expect = M::from_real_rows(&[vec![1.0, 3.0], vec![0.0, 1.0]]).unwrap();
        assert!(e.distance(&expect) < 1e-14);
    }

    #[test]
    fn determinant_is_exp_trace() {
        let a = M::from_fn(4, |i, j| Complex::new((i as f64 - j as f64) * 0.7, ((i * j) % 3) as f64 * 0.4));
        let e = matrix_exp(&a).unwrap();
        let lhs = e.det();
        let rhs = a.trace().exp();
        assert!((lhs - rhs).norm() <= 1e-9 * rhs.norm());
    }

    #[test]
    fn overflow_is_reported() {
        let a = M::scalar(2, Complex::new(1e6, 0.0));
        assert!(matches!(matrix_exp(&a), Err(Error::Overflow { .. })));
    }

    #[test]
    fn frechet_matches_finite_difference() {
        let a = M::from_real_rows(&[vec![0.1, 0.4], vec![-0.3, 0.2]]).unwrap();
        let e = M::from_real_rows(&[vec![0.0, 1.0], vec![0.5, -0.2]]).unwrap();
        let h = 1e-6;
        let fd = (matrix_exp(&a.axpy(Complex::new(h, 0.0), &e)).unwrap()
            - matrix_exp(&a.axpy(Complex::new(-h, 0.0), &e)).unwrap())
        .scale_real(0.5 / h);
        assert!(exp_frechet(&a, &e).unwrap().distance(&fd) < 1e-8);
    }
}
