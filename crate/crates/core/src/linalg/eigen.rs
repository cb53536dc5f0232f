//! Complex Schur decomposition by Householder reduction to Hessenberg form
//! followed by single-shift QR sweeps with Wilkinson shifts.

use num_complex::Complex;
use num_traits::{One, Zero};

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};
use crate::scalar::{re, Real, C};

/// Multiset of eigenvalues (with multiplicities).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T> {
    values: Vec<C<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn new(values: Vec<C<T>>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[C<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_vec(self) -> Vec<C<T>> {
        self.values
    }

    pub fn max_modulus(&self) -> T {
        self.values.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn map(&self, f: impl Fn(C<T>) -> C<T>) -> Self {
        Self { values: self.values.iter().map(|&z| f(z)).collect() }
    }

    /// Greedy minimal-cost matching: repeatedly pairs the closest remaining
    /// elements. Returns the largest paired distance, or `None` if the
    /// cardinalities differ.
    pub fn matching_distance(&self, other: &Self) -> Option<T> {
        if self.len() != other.len() {
            return None;
        }
        let n = self.len();
        let mut used_a = vec![false; n];
        let mut used_b = vec![false; n];
        let mut pairs: Vec<(T, usize, usize)> = Vec::with_capacity(n * n);
        for (i, a) in self.values.iter().enumerate() {
            for (j, b) in other.values.iter().enumerate() {
                pairs.push(((a - b).norm(), i, j));
            }
        }
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut worst = T::zero();
        let mut matched = 0;
        for (d, i, j) in pairs {
            if used_a[i] || used_b[j] {
                continue;
            }
            used_a[i] = true;
            used_b[j] = true;
            worst = worst.max(d);
            matched += 1;
            if matched == n {
                break;
            }
        }
        Some(worst)
    }

    /// Multiset equality within `1e-6·(1 + scale)` unless a tolerance is given.
    pub fn matches(&self, other: &Self, tol: Option<T>) -> bool {
        let scale = self.max_modulus().max(other.max_modulus());
        let tol = tol.unwrap_or_else(|| T::lit(1e-6) * (T::one() + scale));
        self.matching_distance(other).map_or(false, |d| d <= tol)
    }
}

/// Complex Schur form `A = U T Uᴴ`.
#[derive(Clone, Debug)]
pub struct Schur<T> {
    pub t: ComplexMatrix<T>,
    pub u: ComplexMatrix<T>,
}

fn householder_hessenberg<T: Real>(a: &mut ComplexMatrix<T>, u: &mut Option<ComplexMatrix<T>>) {
    let n = a.dim();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let alpha_norm = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<T>().sqrt();
        if alpha_norm == T::zero() {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() == T::zero() { C::one() } else { x0 / x0.norm() };
        // v = x + phase·‖x‖·e₁
        let mut v: Vec<C<T>> = (k + 1..n).map(|i| a[(i, k)]).collect();
        v[0] += phase * alpha_norm;
        let vnorm2: T = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        // A ← (I − 2vvᴴ/vᴴv) A
        for j in 0..n {
            let s = (0..v.len()).fold(C::zero(), |acc, i| acc + v[i].conj() * a[(k + 1 + i, j)]);
            let f = s * two / vnorm2;
            for i in 0..v.len() {
                a[(k + 1 + i, j)] -= v[i] * f;
            }
        }
        // A ← A (I − 2vvᴴ/vᴴv)
        for i in 0..n {
            let s = (0..v.len()).fold(C::zero(), |acc, j| acc + a[(i, k + 1 + j)] * v[j]);
            let f = s * two / vnorm2;
            for j in 0..v.len() {
                a[(i, k + 1 + j)] -= f * v[j].conj();
            }
        }
        if let Some(u) = u.as_mut() {
            for i in 0..n {
                let s = (0..v.len()).fold(C::zero(), |acc, j| acc + u[(i, k + 1 + j)] * v[j]);
                let f = s * two / vnorm2;
                for j in 0..v.len() {
                    u[(i, k + 1 + j)] -= f * v[j].conj();
                }
            }
        }
        for i in k + 2..n {
            a[(i, k)] = C::zero();
        }
    }
}

/// Givens rotation `G = [[c, s], [−s̄, c]]` with real `c` such that
/// `G·[a; b] = [r; 0]`.
fn givens<T: Real>(a: C<T>, b: C<T>) -> (T, C<T>) {
    let na = a.norm();
    let nb = b.norm();
    if nb == T::zero() {
        return (T::one(), C::zero());
    }
    if na == T::zero() {
        return (T::zero(), (b.conj() / nb) * re(T::one()));
    }
    let r = na.hypot(nb);
    let c = na / r;
    let s = (a / na) * b.conj() / r;
    (c, s)
}

fn wilkinson_shift<T: Real>(a: C<T>, b: C<T>, c: C<T>, d: C<T>) -> C<T> {
    // eigenvalue of [[a, b], [c, d]] closest to d
    let half = T::lit(0.5);
    let tr = (a + d) * half;
    let det = a * d - b * c;
    let disc = (tr * tr - det).sqrt();
    let l1 = tr + disc;
    let l2 = tr - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn schur_impl<T: Real>(a: &ComplexMatrix<T>, want_u: bool) -> Result<Schur<T>> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = a.dim();
    let mut h = a.clone();
    let mut u = if want_u { Some(ComplexMatrix::identity(n)) } else { None };
    householder_hessenberg(&mut h, &mut u);
    if n <= 1 {
        return Ok(Schur { t: h, u: u.unwrap_or_else(|| ComplexMatrix::identity(n)) });
    }
    let eps = T::epsilon();
    let norm = h.max_abs().max(T::min_positive_value());
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut since_deflation = 0usize;
    let max_iter = 60 * n.max(4);
    while hi > 0 {
        // find the start of the unreduced block ending at hi
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let thresh = if diag == T::zero() { eps * norm } else { eps * diag };
            if sub <= thresh {
                h[(lo, lo - 1)] = C::zero();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        iter += 1;
        since_deflation += 1;
        if iter > max_iter {
            let residual = (1..n).map(|i| h[(i, i - 1)].norm()).fold(T::zero(), T::max);
            return Err(Error::NoConvergence { what: "QR eigenvalue iteration", residual: residual.as_f64() });
        }
        let mut mu = wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)]);
        if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            mu = h[(hi, hi)] + re(h[(hi, hi - 1)].norm() * T::lit(0.75)) + Complex::new(T::zero(), h[(hi, hi - 1)].norm() * T::lit(0.4375));
        }
        // explicit shifted QR step on the active block [lo, hi]
        let mut rots: Vec<(T, C<T>)> = Vec::with_capacity(hi - lo);
        for i in lo..=hi {
            h[(i, i)] -= mu;
        }
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            rots.push((c, s));
            for j in k..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
        }
        for (idx, k) in (lo..hi).enumerate() {
            let (c, s) = rots[idx];
            let top = if want_u { 0 } else { lo };
            for i in top..=(k + 1).min(hi) {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
            if let Some(u) = u.as_mut() {
                for i in 0..n {
                    let x = u[(i, k)];
                    let y = u[(i, k + 1)];
                    u[(i, k)] = x * c + y * s.conj();
                    u[(i, k + 1)] = -x * s + y * c;
                }
            }
        }
        for i in lo..=hi {
            h[(i, i)] += mu;
        }
    }
    for i in 1..n {
        for j in 0..i {
            h[(i, j)] = C::zero();
        }
    }
    Ok(Schur { t: h, u: u.unwrap_or_else(|| ComplexMatrix::identity(n)) })
}

/// Full complex Schur decomposition.
pub fn schur<T: Real>(a: &ComplexMatrix<T>) -> Result<Schur<T>> {
    schur_impl(a, true)
}

/// Eigenvalues with multiplicities.
pub fn eigenvalues<T: Real>(a: &ComplexMatrix<T>) -> Result<Spectrum<T>> {
    let s = schur_impl(a, false)?;
    Ok(Spectrum::new(s.t.diag()))
}

/// Eigen-decomposition `A = V Λ V⁻¹`; columns of `V` are unit eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenDecomposition<T> {
    pub values: Vec<C<T>>,
    pub vectors: ComplexMatrix<T>,
}

impl<T: Real> EigenDecomposition<T> {
    /// Largest residual `‖Av − λv‖` over the computed pairs.
    pub fn residual(&self, a: &ComplexMatrix<T>) -> T {
        let n = a.dim();
        (0..n)
            .map(|j| {
                let v: Vec<C<T>> = (0..n).map(|i| self.vectors[(i, j)]).collect();
                let av = a.mul_vec(&v);
                av.iter().zip(&v).map(|(x, y)| (x - y * self.values[j]).norm_sqr()).sum::<T>().sqrt()
            })
            .fold(T::zero(), T::max)
    }
}

/// Eigenvectors from the Schur form by back substitution on the triangular factor.
///
/// Near-equal diagonal entries are separated by a small perturbation of the
/// denominator; a defective matrix then yields an ill-conditioned `V`, which
/// callers detect through the condition of `V`.
pub fn eigen_decomposition<T: Real>(a: &ComplexMatrix<T>) -> Result<EigenDecomposition<T>> {
    let Schur { t, u } = schur(a)?;
    let n = a.dim();
    let small = T::epsilon() * t.max_abs().max(T::min_positive_value());
    let mut y = ComplexMatrix::zeros(n);
    for col in 0..n {
        let lambda = t[(col, col)];
        y[(col, col)] = C::<T>::one();
        for i in (0..col).rev() {
            let s = (i + 1..=col).fold(C::<T>::zero(), |acc, m| acc + t[(i, m)] * y[(m, col)]);
            let mut d = t[(i, i)] - lambda;
            if d.norm() < small {
                d = re(small);
            }
            y[(i, col)] = -s / d;
        }
        let nrm = (0..n).map(|i| y[(i, col)].norm_sqr()).sum::<T>().sqrt();
        for i in 0..n {
            y[(i, col)] = y[(i, col)] / nrm;
        }
    }
    let vectors = u.matmul(&y);
    Ok(EigenDecomposition { values: t.diag(), vectors })
}
