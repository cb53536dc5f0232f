//! Local inverse of `A ↦ exp(2πiA)` near a non-resonant `A₀`.

use num_complex::Complex;

use super::eigen::{eigen_decomposition, eigenvalues};
use super::expm::{exp_frechet, exp_two_pi_i};
use super::matrix::{ComplexMatrix, Lu};
use crate::error::{Error, Result};
use crate::scalar::{to_pair, two_pi_i, Real, C};

/// Smallest `|λₚ − λ_q − m|` over eigenvalue pairs and nonzero integers `m`.
pub fn integer_separation<T: Real>(values: &[C<T>]) -> T {
    let max_abs = values.iter().map(|z| z.norm()).fold(T::zero(), T::max);
    let m_cut = (T::lit(2.0) * max_abs).ceil().to_i64().unwrap_or(0) + 1;
    let mut best = T::infinity();
    for a in values {
        for b in values {
            let d = a - b;
            for m in 1..=m_cut {
                let mf = T::from_i64(m).unwrap();
                best = best.min((d - mf).norm()).min((d + mf).norm());
            }
        }
    }
    best
}

/// Radius of the disks around `spec(A₀)` on which `exp(2πi·)` is schlicht.
pub fn schlicht_radius<T: Real>(a0_spec: &[C<T>]) -> T {
    let margin = integer_separation(a0_spec);
    T::lit(0.999) * (margin * T::lit(0.5)).min(T::lit(0.25))
}

/// The `A` with `exp(2πiA) = M` whose spectrum lies in the schlicht
/// neighbourhood of `spec(A₀)`.
pub fn matrix_log_near<T: Real>(a0: &ComplexMatrix<T>, m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    a0.check_same_dim(m)?;
    if !a0.is_finite() || !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let k = a0.dim();
    let spec0 = eigenvalues(a0)?.into_vec();
    let margin = integer_separation(&spec0);
    let floor = T::tol(1e-6);
    if margin < floor {
        return Err(Error::Precondition(format!(
            "reference exponent is resonant (integer separation {:e})",
            margin.as_f64()
        )));
    }
    Lu::new(m)?;
    let radius = schlicht_radius(&spec0);
    let two_pi = T::TAU();

    // lift each eigenvalue of M to the disk it belongs to
    let lift = |mu: C<T>| -> Result<C<T>> {
        if mu.norm() == T::zero() {
            return Err(Error::Singular);
        }
        let base = mu.ln() / Complex::new(T::zero(), two_pi);
        for l in &spec0 {
            let shift = (l.re - base.re).round();
            let cand = base + shift;
            if (cand - l).norm() < radius {
                return Ok(cand);
            }
        }
        let (re, im) = to_pair(mu);
        Err(Error::BranchAmbiguity { re, im })
    };

    let start = match eigen_decomposition(m) {
        Ok(dec) => {
            let lifted: Result<Vec<C<T>>> = dec.values.iter().map(|&mu| lift(mu)).collect();
            let lifted = lifted?;
            match dec.vectors.inverse() {
                Ok(vinv) if dec.vectors.norm_fro() * vinv.norm_fro() < T::lit(1e6) => {
                    dec.vectors.matmul(&ComplexMatrix::from_diag(&lifted)).matmul(&vinv)
                }
                _ => a0.clone(),
            }
        }
        Err(_) => a0.clone(),
    };

    let target_tol = T::tol(1e-13) * m.norm_fro().max(T::one());
    let mut x = start;
    let mut best = T::infinity();
    for _ in 0..50 {
        let f = exp_two_pi_i(&x)? - m;
        let r = f.norm_fro();
        if r <= target_tol {
            break;
        }
        if r >= best && best <= T::tol(1e-10) {
            break;
        }
        best = best.min(r);
        // Jacobian of X ↦ exp(2πiX), column by column
        let mut jac = ComplexMatrix::zeros(k * k);
        let scaled = x.scale(two_pi_i());
        for p in 0..k {
            for q in 0..k {
                let e = ComplexMatrix::unit(k, p, q).scale(two_pi_i());
                let d = exp_frechet(&scaled, &e)?;
                for (row, v) in d.as_slice().iter().enumerate() {
                    jac[(row, p * k + q)] = *v;
                }
            }
        }
        let dx = Lu::new(&jac)?.solve_vec(f.as_slice());
        x = x - ComplexMatrix::from_row_major(k, dx)?;
    }
    let residual = (exp_two_pi_i(&x)? - m).norm_fro();
    if residual > T::tol(1e-9) * m.norm_fro().max(T::one()) {
        return Err(Error::NoConvergence { what: "matrix logarithm Newton iteration", residual: residual.as_f64() });
    }
    for mu in eigenvalues(&x)?.values() {
        if !spec0.iter().any(|l| (mu - l).norm() < radius) {
            let (re, im) = to_pair(*mu);
            return Err(Error::BranchAmbiguity { re, im });
        }
    }
    Ok(x)
}
