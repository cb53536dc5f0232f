//! The commutator equation `λX − [Q, X] = Y` and the spectrum of `ad_Q`.

use num_traits::Zero;

use super::eigen::{eigen_decomposition, eigenvalues, Spectrum};
use super::matrix::{ComplexMatrix, Lu};
use crate::error::{Error, Result};
use crate::scalar::{to_pair, Real, C};

/// Matrix of `X ↦ QX − XQ` acting on row-major `vec(X)`.
pub fn ad_matrix<T: Real>(q: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let k = q.dim();
    let mut a = ComplexMatrix::zeros(k * k);
    for p in 0..k {
        for s in 0..k {
            let row = p * k + s;
            for m in 0..k {
                a[(row, m * k + s)] += q[(p, m)];
                a[(row, p * k + m)] -= q[(m, s)];
            }
        }
    }
    a
}

/// Eigenvalues of `ad_Q` (size `k²`).
pub fn ad_operator_spectrum<T: Real>(q: &ComplexMatrix<T>) -> Result<Spectrum<T>> {
    eigenvalues(&ad_matrix(q))
}

/// All `λₚ − λ_q`, `p, q = 1..k`.
pub fn pairwise_differences<T: Real>(spec: &Spectrum<T>) -> Spectrum<T> {
    let v = spec.values();
    Spectrum::new(v.iter().flat_map(|a| v.iter().map(move |b| a - b)).collect())
}

/// `2^{k²} ε^{−k²} (|λ| + 2‖Q‖)^{k²−1} ‖Y‖`, Frobenius norms.
pub fn efsol_bound<T: Real>(lambda: C<T>, q: &ComplexMatrix<T>, y_norm: T, epsilon: T) -> T {
    let k2 = (q.dim() * q.dim()) as i32;
    let a = lambda.norm() + T::lit(2.0) * q.norm_fro();
    // evaluate in log space; the value routinely exceeds the exponent range
    let ln = T::from_i32(k2).unwrap() * (T::lit(2.0).ln() - epsilon.ln())
        + T::from_i32(k2 - 1).unwrap() * a.ln()
        + y_norm.ln();
    if y_norm == T::zero() {
        T::zero()
    } else {
        ln.exp()
    }
}

/// Constant `C(ε, μ, k)` of the large-`λ` refined estimate: the maximum of the
/// `|λ| > 2μ` regime `(1+3μ)/μ` and the `|λ| ≤ 3μ` regime
/// `(1+3μ)·10^{k²}ε^{−k²}μ^{k²−1}`.
pub fn efsolr_constant<T: Real>(epsilon: T, mu: T, k: usize) -> T {
    let k2 = (k * k) as i32;
    let one = T::one();
    let three = T::lit(3.0);
    if mu == T::zero() {
        return (one + epsilon) / epsilon;
    }
    let c_a = (one + three * mu) / mu;
    let ln_b = (one + three * mu).ln()
        + T::from_i32(k2).unwrap() * (T::lit(10.0).ln() - epsilon.ln())
        + T::from_i32(k2 - 1).unwrap() * mu.ln();
    c_a.max(ln_b.exp())
}

/// `C(ε, μ, k)/(1 + |λ|)·‖Y‖`.
pub fn efsolr_bound<T: Real>(lambda: C<T>, epsilon: T, mu: T, k: usize, y_norm: T) -> T {
    if y_norm == T::zero() {
        return T::zero();
    }
    efsolr_constant(epsilon, mu, k) / (T::one() + lambda.norm()) * y_norm
}

/// Solution with its diagnostics.
#[derive(Clone, Debug)]
pub struct SylvesterSolution<T> {
    pub x: ComplexMatrix<T>,
    /// `‖λX − [Q,X] − Y‖_F`
    pub residual: T,
    /// smallest `|λ − (λₚ − λ_q)|`
    pub margin: T,
    pub used_eigenbasis: bool,
}

/// Reusable solver for a fixed `Q` and varying `λ`.
#[derive(Clone, Debug)]
pub struct AdResolvent<T> {
    q: ComplexMatrix<T>,
    eigenvalues: Vec<C<T>>,
    basis: Option<(ComplexMatrix<T>, ComplexMatrix<T>)>,
}

impl<T: Real> AdResolvent<T> {
    pub fn new(q: &ComplexMatrix<T>) -> Result<Self> {
        if !q.is_finite() {
            return Err(Error::NonFinite);
        }
        let dec = eigen_decomposition(q)?;
        let basis = match dec.vectors.inverse() {
            Ok(vinv) => {
                let cond = dec.vectors.norm_fro() * vinv.norm_fro();
                let ok = cond <= T::lit(1e8).min(T::one() / T::epsilon().sqrt())
                    && dec.residual(q) <= T::tol(1e-10) * (T::one() + q.norm_fro());
                ok.then_some((dec.vectors.clone(), vinv))
            }
            Err(_) => None,
        };
        Ok(Self { q: q.clone(), eigenvalues: dec.values, basis })
    }

    pub fn q(&self) -> &ComplexMatrix<T> {
        &self.q
    }

    pub fn spectrum(&self) -> Spectrum<T> {
        Spectrum::new(self.eigenvalues.clone())
    }

    pub fn is_diagonalizable(&self) -> bool {
        self.basis.is_some()
    }

    /// `min |λ − (λₚ − λ_q)|` and the minimizing difference.
    pub fn margin(&self, lambda: C<T>) -> (T, C<T>) {
        let mut best = (T::infinity(), C::zero());
        for a in &self.eigenvalues {
            for b in &self.eigenvalues {
                let d = a - b;
                let dist = (lambda - d).norm();
                if dist < best.0 {
                    best = (dist, d);
                }
            }
        }
        best
    }

    /// Residual tolerance `1e-10·(‖Y‖ + ‖X‖(|λ| + 2‖Q‖))`, floored at the scalar's resolution.
    pub fn residual_tolerance(&self, lambda: C<T>, x: &ComplexMatrix<T>, y: &ComplexMatrix<T>) -> T {
        T::tol(1e-10) * (y.norm_fro() + x.norm_fro() * (lambda.norm() + T::lit(2.0) * self.q.norm_fro()))
    }

    fn residual(&self, lambda: C<T>, x: &ComplexMatrix<T>, y: &ComplexMatrix<T>) -> T {
        (x.scale(lambda) - self.q.commutator(x) - y).norm_fro()
    }

    fn solve_eigenbasis(&self, lambda: C<T>, y: &ComplexMatrix<T>) -> Option<ComplexMatrix<T>> {
        let (v, vinv) = self.basis.as_ref()?;
        let yt = vinv.matmul(y).matmul(v);
        let ev = &self.eigenvalues;
        let xt = ComplexMatrix::from_fn(y.dim(), |p, q| yt[(p, q)] / (lambda - (ev[p] - ev[q])));
        Some(v.matmul(&xt).matmul(vinv))
    }

    /// `(λI − ad_Q)` as a `k²×k²` matrix.
    pub fn operator(&self, lambda: C<T>) -> ComplexMatrix<T> {
        ad_matrix(&self.q).scale(-C::<T>::new(T::one(), T::zero())).add_scaled_identity(lambda)
    }

    fn solve_lu(&self, lambda: C<T>, y: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        let k = y.dim();
        let op = self.operator(lambda);
        let lu = Lu::new(&op)?;
        let mut x = lu.solve_vec(y.as_slice());
        // one step of refinement
        let r: Vec<C<T>> = op.mul_vec(&x).iter().zip(y.as_slice()).map(|(a, b)| b - a).collect();
        let dx = lu.solve_vec(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        ComplexMatrix::from_row_major(k, x)
    }

    /// Solves with resonance check against `epsilon`.
    pub fn solve(&self, lambda: C<T>, y: &ComplexMatrix<T>, epsilon: T) -> Result<SylvesterSolution<T>> {
        self.q.check_same_dim(y)?;
        if !y.is_finite() || !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let (margin, diff) = self.margin(lambda);
        if margin < epsilon {
            let (re, im) = to_pair(diff);
            return Err(Error::Resonance { re, im, distance: margin.as_f64(), margin: epsilon.as_f64() });
        }
        if let Some(x) = self.solve_eigenbasis(lambda, y) {
            let residual = self.residual(lambda, &x, y);
            if residual <= self.residual_tolerance(lambda, &x, y) {
                return Ok(SylvesterSolution { x, residual, margin, used_eigenbasis: true });
            }
        }
        let x = self.solve_lu(lambda, y)?;
        let residual = self.residual(lambda, &x, y);
        Ok(SylvesterSolution { x, residual, margin, used_eigenbasis: false })
    }

    /// Frobenius norm of `(λI − ad_Q)⁻¹`, an upper bound for its operator norm
    /// with respect to the Frobenius norm on matrices.
    pub fn resolvent_norm(&self, lambda: C<T>) -> Result<T> {
        Ok(Lu::new(&self.operator(lambda))?.inverse()?.norm_fro())
    }
}

/// Solves `λX − [Q, X] = Y`, rejecting `λ` within `epsilon` of an eigenvalue difference of `Q`.
pub fn sylvester_solve<T: Real>(
    lambda: C<T>,
    q: &ComplexMatrix<T>,
    y: &ComplexMatrix<T>,
    epsilon: T,
) -> Result<ComplexMatrix<T>> {
    Ok(AdResolvent::new(q)?.solve(lambda, y, epsilon)?.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    type M = ComplexMatrix<f64>;

    fn c(r: f64) -> Complex<f64> {
        Complex::new(r, 0.0)
    }

    #[test]
    fn zero_q_returns_rhs_over_lambda() {
        let y = M::from_real_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let x = sylvester_solve(c(1.0), &M::zeros(2), &y, 1e-6).unwrap();
        assert!(x.distance(&y) < 1e-14);
    }

    #[test]
    fn diagonal_q_entrywise() {
        let q = M::from_diag(&[c(2.0), c(0.0)]);
        let x = sylvester_solve(c(1.0), &q, &M::unit(2, 0, 1), 1e-6).unwrap();
        assert!(x.distance(&M::unit(2, 0, 1).scale_real(-1.0)) < 1e-14);
    }

    #[test]
    fn resonant_lambda_rejected() {
        let q = M::from_diag(&[c(2.0), c(0.0)]);
        let err = sylvester_solve(c(2.0), &q, &M::unit(2, 0, 1), 1e-6).unwrap_err();
        match err {
            Error::Resonance { re, im, .. } => assert_eq!((re, im), (2.0, 0.0)),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn defective_q_uses_lu() {
        let q = M::from_real_rows(&[vec![0.5, 1.0], vec![0.0, 0.5]]).unwrap();
        let res = AdResolvent::new(&q).unwrap();
        assert!(!res.is_diagonalizable());
        let y = M::from_real_rows(&[vec![1.0, -1.0], vec![2.0, 0.5]]).unwrap();
        let s = res.solve(c(3.0), &y, 1e-6).unwrap();
        assert!(s.residual <= res.residual_tolerance(c(3.0), &s.x, &y));
    }

    #[test]
    fn ad_spectrum_of_diagonal() {
        let q = M::from_diag(&[c(1.0), c(3.0)]);
        let s = ad_operator_spectrum(&q).unwrap();
        assert!(s.matches(&Spectrum::new(vec![c(0.0), c(0.0), c(-2.0), c(2.0)]), Some(1e-12)));
    }

    #[test]
    fn ad_spectrum_of_identity() {
        let s = ad_operator_spectrum(&M::identity(3)).unwrap();
        assert_eq!(s.len(), 9);
        assert!(s.max_modulus() < 1e-14);
    }

    #[test]
    fn bounds_are_finite_or_vacuous() {
        let q = M::from_diag(&[c(0.3), c(-0.2)]);
        let b = efsol_bound(c(1.0), &q, 1.0, 1e-2);
        assert!(b > 1.0);
        assert!(efsolr_constant(1e-2, 0.0, 2) > 100.0);
    }
}
