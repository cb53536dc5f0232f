//! The τ-function: `d log τ = ω = Σ_{λ<μ} tr(Q_λQ_μ)·(dt_λ − dt_μ)/(t_λ − t_μ)`.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::schlesinger::{integrate_flow_kind, shifted_states, FlowKind, SchlesingerState, TPath};
use crate::scalar::{Real, C};

/// `ω(dt)` at a state.
pub fn omega_eval<T: Real>(state: &SchlesingerState<T>, dt: &[C<T>]) -> Result<C<T>> {
    let n = state.n();
    if dt.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: dt.len() });
    }
    let mut acc = C::<T>::zero();
    for l in 0..n {
        for m in l + 1..n {
            let d = state.t[l] - state.t[m];
            if d == C::zero() {
                return Err(Error::NearCollision { distance: 0.0, floor: 0.0 });
            }
            acc += state.q[l].matmul(&state.q[m]).trace() * (dt[l] - dt[m]) / d;
        }
    }
    Ok(acc)
}

/// `Δ log τ` accumulated from the start of a path.
#[derive(Clone, Debug)]
pub struct TauAccumulator<T> {
    pub t_start: Vec<C<T>>,
    pub delta_log_tau: C<T>,
    pub error_estimate: T,
    /// `(arclength, Δ log τ)` at accepted steps.
    pub trace: Vec<(T, C<T>)>,
    pub end: SchlesingerState<T>,
}

/// Integrates `ω` jointly with the Schlesinger flow.
pub fn tau_log_integrate<T: Real>(state0: &SchlesingerState<T>, path: &TPath<T>, tol: T) -> Result<TauAccumulator<T>> {
    tau_log_integrate_kind(state0, path, tol, FlowKind::Schlesinger)
}

/// As [`tau_log_integrate`] with the residues evolved by `kind`.
pub fn tau_log_integrate_kind<T: Real>(
    state0: &SchlesingerState<T>,
    path: &TPath<T>,
    tol: T,
    kind: FlowKind,
) -> Result<TauAccumulator<T>> {
    let start = state0.rebased();
    let f = integrate_flow_kind(&start, path, tol, kind)?;
    Ok(TauAccumulator {
        t_start: start.t.clone(),
        delta_log_tau: f.state.log_tau,
        error_estimate: f.stats.error_estimate,
        trace: f.checkpoints.iter().map(|c| (c.s, c.log_tau)).collect(),
        end: f.state,
    })
}

/// `Σ_{λ<μ} tr(Q_λQ_μ)·Δ ln(t_λ − t_μ)` for constant `Q` along a straight segment,
/// with the logarithm continued along the segment.
pub fn tau_closed_form<T: Real>(state: &SchlesingerState<T>, end: &[C<T>]) -> Result<C<T>> {
    let n = state.n();
    if end.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: end.len() });
    }
    let mut acc = C::<T>::zero();
    for l in 0..n {
        for m in l + 1..n {
            let a = state.t[l] - state.t[m];
            let b = end[l] - end[m];
            // ratio stays off the negative axis for collision-free straight segments
            acc += state.q[l].matmul(&state.q[m]).trace() * (b / a).ln();
        }
    }
    Ok(acc)
}

#[derive(Clone, Debug)]
pub struct ClosednessReport<T> {
    pub loop_integral: C<T>,
    /// Largest `|∂_b ω(e_a) − ∂_a ω(e_b)|` over coordinate pairs, relative to the larger term.
    pub mixed_partial_residual: T,
    pub h: T,
    pub passed: bool,
}

/// `|∮ ω| ≤ 5·tol` on a closed path, and symmetry of FD mixed partials of `log τ`.
pub fn verify_closedness<T: Real>(state: &SchlesingerState<T>, loop_path: &TPath<T>, tol: T) -> Result<ClosednessReport<T>> {
    if !loop_path.is_closed() {
        return Err(Error::Precondition("closedness needs a closed path".into()));
    }
    let acc = tau_log_integrate(state, loop_path, tol)?;
    let h = T::lit(1e-3) * state.min_gap();
    let n = state.n();
    let e = |i: usize| -> Vec<C<T>> { (0..n).map(|j| if i == j { C::new(T::one(), T::zero()) } else { C::zero() }).collect() };
    let mut mixed = T::zero();
    let ftol = (tol * T::lit(1e-2)).max(T::tol(1e-13));
    for a in 0..n {
        for b in a + 1..n {
            let (pb, mb) = shifted_states(state, b, C::new(h, T::zero()), ftol)?;
            let (pa, ma) = shifted_states(state, a, C::new(h, T::zero()), ftol)?;
            let dab = (omega_eval(&pb, &e(a))? - omega_eval(&mb, &e(a))?) / (T::lit(2.0) * h);
            let dba = (omega_eval(&pa, &e(b))? - omega_eval(&ma, &e(b))?) / (T::lit(2.0) * h);
            let sc = dab.norm().max(dba.norm()).max(T::min_positive_value());
            mixed = mixed.max((dab - dba).norm() / sc);
        }
    }
    let passed = acc.delta_log_tau.norm() <= T::lit(5.0) * tol;
    Ok(ClosednessReport { loop_integral: acc.delta_log_tau, mixed_partial_residual: mixed, h, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexMatrix;
    use crate::sample;
    use num_complex::Complex;

    type M = ComplexMatrix<f64>;

    fn c(re: f64, im: f64) -> C<f64> {
        Complex::new(re, im)
    }

    fn scalar(q: f64) -> SchlesingerState<f64> {
        SchlesingerState::new(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![M::scalar(1, c(q, 0.0)), M::scalar(1, c(-q, 0.0))]).unwrap()
    }

    #[test]
    fn scalar_omega() {
        let q = 0.7;
        let s = scalar(q);
        let w = omega_eval(&s, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((w - c(-q * q, 0.0) / (s.t[0] - s.t[1])).norm() < 1e-15);
        let w2 = omega_eval(&s, &[c(2.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((w2 - w * 2.0).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_products_give_zero() {
        let a = M::from_diag(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let b = M::from_diag(&[c(0.0, 0.0), c(1.0, 0.0)]);
        let s = SchlesingerState::new(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![a, b]).unwrap();
        assert_eq!(omega_eval(&s, &[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn minus_log_two() {
        let s = scalar(1.0);
        let p = TPath::straight(s.t.clone(), vec![c(0.0, 0.0), c(2.0, 0.0)]).unwrap();
        let acc = tau_log_integrate(&s, &p, 1e-12).unwrap();
        assert!((acc.delta_log_tau - c(-std::f64::consts::LN_2, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn zero_length_path() {
        let s = scalar(0.5);
        let p = TPath::from_vertices(vec![s.t.clone()]).unwrap();
        assert_eq!(tau_log_integrate(&s, &p, 1e-10).unwrap().delta_log_tau, c(0.0, 0.0));
    }

    #[test]
    fn reversal_flips_sign() {
        let mut r = sample::rng(11);
        let s = SchlesingerState::from_system(&sample::zero_sum_system::<f64, _>(&mut r, 2, 3, 0.4, 0.05));
        let mut b = s.t.clone();
        b[1] += c(0.2, -0.15);
        let p = TPath::straight(s.t.clone(), b).unwrap();
        let fwd = tau_log_integrate(&s, &p, 1e-12).unwrap();
        let back = tau_log_integrate(&fwd.end, &p.reversed(), 1e-12).unwrap();
        assert!((fwd.delta_log_tau + back.delta_log_tau).norm() < 1e-10);
    }
}
