//! The Schlesinger system
//! `dQ_ν = Σ_{μ≠ν} [Q_μ, Q_ν]·(dt_μ − dt_ν)/(t_μ − t_ν)`
//! on the configuration space of distinct poles, integrated along polylines
//! together with `log τ`.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::frobenius::{approach_path, build_local_series, connection_data, LocalOptions};
use crate::fuchsian::FuchsianSystem;
use crate::infinity::{laurent_minus_one, solution_at_infinity};
use crate::linalg::ComplexMatrix;
use crate::ode::{integrate, OdeOptions, OdeStats};
use crate::path::{generator_monodromies, segment_distance, GeneratorLoops};
use crate::sample;
use crate::scalar::{Real, C};
use crate::tau::omega_eval;

/// Pole loci, residues and the accumulated `log τ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SchlesingerState<T> {
    pub t: Vec<C<T>>,
    pub q: Vec<ComplexMatrix<T>>,
    pub log_tau: C<T>,
}

fn min_pairwise<T: Real>(t: &[C<T>]) -> T {
    let mut m = T::infinity();
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            m = m.min((t[i] - t[j]).norm());
        }
    }
    m
}

impl<T: Real> SchlesingerState<T> {
    pub fn new(t: Vec<C<T>>, q: Vec<ComplexMatrix<T>>) -> Result<Self> {
        // validation only
        FuchsianSystem::new(t.clone(), q.clone(), false)?;
        Ok(Self { t, q, log_tau: C::zero() })
    }

    pub fn from_system(system: &FuchsianSystem<T>) -> Self {
        Self { t: system.poles().to_vec(), q: system.residues().to_vec(), log_tau: C::zero() }
    }

    /// The Fuchsian system at this point, flagged regular at `∞` when `Σ Qⱼ ≈ 0`.
    pub fn system(&self) -> Result<FuchsianSystem<T>> {
        let zs = self.residue_sum().norm_fro() <= T::tol(1e-12) * self.scale();
        FuchsianSystem::new(self.t.clone(), self.q.clone(), zs)
    }

    pub fn n(&self) -> usize {
        self.t.len()
    }

    pub fn dim(&self) -> usize {
        self.q.first().map_or(0, |q| q.dim())
    }

    pub fn residue_sum(&self) -> ComplexMatrix<T> {
        self.q.iter().fold(ComplexMatrix::zeros(self.dim()), |a, q| a + q)
    }

    /// `max ‖Qⱼ‖`, at least one.
    pub fn scale(&self) -> T {
        self.q.iter().map(|q| q.norm_fro()).fold(T::one(), T::max)
    }

    pub fn min_gap(&self) -> T {
        min_pairwise(&self.t)
    }

    /// `tr Qⱼᵐ` for `m = 1..=k`, per pole.
    pub fn trace_powers(&self) -> Vec<Vec<C<T>>> {
        self.q
            .iter()
            .map(|q| {
                let mut p = q.clone();
                let mut out = Vec::with_capacity(q.dim());
                for _ in 0..q.dim() {
                    out.push(p.trace());
                    p = p.matmul(q);
                }
                out
            })
            .collect()
    }

    /// Same state with `log τ` reset.
    pub fn rebased(&self) -> Self {
        Self { log_tau: C::zero(), ..self.clone() }
    }
}

/// `dQ` for a tangent direction `dt`.
pub fn schlesinger_rhs<T: Real>(state: &SchlesingerState<T>, dt: &[C<T>]) -> Result<Vec<ComplexMatrix<T>>> {
    let n = state.n();
    if dt.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: dt.len() });
    }
    let mut dq = vec![ComplexMatrix::zeros(state.dim()); n];
    for mu in 0..n {
        for nu in mu + 1..n {
            let d = state.t[mu] - state.t[nu];
            if d == C::zero() {
                return Err(Error::NearCollision { distance: 0.0, floor: 0.0 });
            }
            let c = state.q[mu].commutator(&state.q[nu]).scale((dt[mu] - dt[nu]) / d);
            dq[nu] += &c;
            dq[mu] -= &c;
        }
    }
    Ok(dq)
}

/// Variants of the residue evolution. Only [`FlowKind::Schlesinger`] solves the
/// system; the others are controls for closedness checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    Schlesinger,
    /// Residues held fixed.
    Frozen,
    /// Only the `dt_ν` terms of `dQ_ν`; not integrable.
    DiagonalOnly,
}

fn flow_rhs<T: Real>(kind: FlowKind, state: &SchlesingerState<T>, dt: &[C<T>]) -> Result<Vec<ComplexMatrix<T>>> {
    match kind {
        FlowKind::Schlesinger => schlesinger_rhs(state, dt),
        FlowKind::Frozen => Ok(vec![ComplexMatrix::zeros(state.dim()); state.n()]),
        FlowKind::DiagonalOnly => {
            let n = state.n();
            let mut dq = vec![ComplexMatrix::zeros(state.dim()); n];
            for nu in 0..n {
                for mu in 0..n {
                    if mu != nu {
                        let c = state.q[mu].commutator(&state.q[nu]).scale(-dt[nu] / (state.t[mu] - state.t[nu]));
                        dq[nu] += &c;
                    }
                }
            }
            Ok(dq)
        }
    }
}

/// Polyline in the configuration space with its collision ledger.
#[derive(Clone, Debug)]
pub struct TPath<T> {
    vertices: Vec<Vec<C<T>>>,
    floor: T,
    ledger: Vec<T>,
}

/// Fraction of the initial minimal gap below which a path is refused.
pub const COLLISION_FLOOR: f64 = 1e-2;

impl<T: Real> TPath<T> {
    pub fn new(vertices: Vec<Vec<C<T>>>, floor: T) -> Result<Self> {
        let n = vertices.first().map_or(0, |v| v.len());
        if vertices.is_empty() || n == 0 {
            return Err(Error::Precondition("a configuration path needs at least one vertex".into()));
        }
        if let Some(v) = vertices.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
        let mut ledger = Vec::with_capacity(vertices.len().saturating_sub(1));
        let origin = C::<T>::zero();
        for w in vertices.windows(2) {
            let mut m = T::infinity();
            for i in 0..n {
                for j in i + 1..n {
                    m = m.min(segment_distance(w[0][i] - w[0][j], w[1][i] - w[1][j], origin));
                }
            }
            if m <= floor {
                return Err(Error::NearCollision { distance: m.as_f64(), floor: floor.as_f64() });
            }
            ledger.push(m);
        }
        if vertices.len() == 1 && min_pairwise(&vertices[0]) <= floor {
            return Err(Error::NearCollision { distance: min_pairwise(&vertices[0]).as_f64(), floor: floor.as_f64() });
        }
        Ok(Self { vertices, floor, ledger })
    }

    /// Path with the default floor `1e-2·` the minimal gap at its first vertex.
    pub fn from_vertices(vertices: Vec<Vec<C<T>>>) -> Result<Self> {
        let gap = vertices.first().map_or(T::one(), |v| min_pairwise(v));
        let floor = if gap.is_finite() { gap * T::lit(COLLISION_FLOOR) } else { T::zero() };
        Self::new(vertices, floor)
    }

    pub fn straight(a: Vec<C<T>>, b: Vec<C<T>>) -> Result<Self> {
        Self::from_vertices(vec![a, b])
    }

    /// `base → base + ha·e_a → base + ha·e_a + hb·e_b → base + hb·e_b → base`.
    pub fn square(base: &[C<T>], a: usize, b: usize, ha: C<T>, hb: C<T>) -> Result<Self> {
        if a >= base.len() || b >= base.len() || a == b {
            return Err(Error::Precondition(format!("invalid coordinate pair ({a}, {b})")));
        }
        let mv = |da: C<T>, db: C<T>| {
            let mut v = base.to_vec();
            v[a] += da;
            v[b] += db;
            v
        };
        let z = C::zero();
        Self::from_vertices(vec![mv(z, z), mv(ha, z), mv(ha, hb), mv(z, hb), mv(z, z)])
    }

    pub fn vertices(&self) -> &[Vec<C<T>>] {
        &self.vertices
    }

    pub fn start(&self) -> &[C<T>] {
        &self.vertices[0]
    }

    pub fn end(&self) -> &[C<T>] {
        self.vertices.last().unwrap()
    }

    pub fn floor(&self) -> T {
        self.floor
    }

    /// Minimal pairwise pole distance along each segment.
    pub fn ledger(&self) -> &[T] {
        &self.ledger
    }

    pub fn min_separation(&self) -> T {
        self.ledger.iter().cloned().fold(min_pairwise(self.start()), T::min)
    }

    pub fn arclength(&self) -> T {
        self.vertices.windows(2).map(|w| dist(&w[0], &w[1])).sum()
    }

    pub fn is_closed(&self) -> bool {
        dist(self.start(), self.end()) == T::zero()
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        let mut ledger = self.ledger.clone();
        ledger.reverse();
        Self { vertices: v, floor: self.floor, ledger }
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if dist(self.end(), other.start()) > T::epsilon() * T::lit(16.0) * (T::one() + norm(self.end())) {
            return Err(Error::Precondition("paths do not meet".into()));
        }
        let mut v = self.vertices.clone();
        v.extend(other.vertices.iter().skip(1).cloned());
        Self::new(v, self.floor.min(other.floor))
    }

    /// Largest displacement of any single pole from the start.
    pub fn max_displacement(&self) -> T {
        let s = self.start();
        self.vertices
            .iter()
            .flat_map(|v| v.iter().zip(s).map(|(a, b)| (a - b).norm()))
            .fold(T::zero(), T::max)
    }
}

fn norm<T: Real>(v: &[C<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

fn dist<T: Real>(a: &[C<T>], b: &[C<T>]) -> T {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<T>().sqrt()
}

/// Accepted-step snapshot of a flow.
#[derive(Clone, Debug)]
pub struct Checkpoint<T> {
    /// Arclength from the start of the path.
    pub s: T,
    pub t: Vec<C<T>>,
    pub q: Vec<ComplexMatrix<T>>,
    pub log_tau: C<T>,
}

#[derive(Clone, Debug)]
pub struct Flow<T> {
    pub state: SchlesingerState<T>,
    pub checkpoints: Vec<Checkpoint<T>>,
    pub stats: OdeStats<T>,
    /// `max ‖ΣQⱼ(s) − ΣQⱼ(0)‖`
    pub sum_drift: T,
    /// `max |tr Qⱼᵐ(s) − tr Qⱼᵐ(0)| / max(1, ‖Qⱼ(0)‖ᵐ)`
    pub trace_drift: T,
    pub arclength: T,
}

fn pack<T: Real>(q: &[ComplexMatrix<T>], log_tau: C<T>) -> Vec<C<T>> {
    let mut v: Vec<C<T>> = q.iter().flat_map(|m| m.as_slice().iter().cloned()).collect();
    v.push(log_tau);
    v
}

fn unpack<T: Real>(y: &[C<T>], n: usize, k: usize) -> (Vec<ComplexMatrix<T>>, C<T>) {
    let kk = k * k;
    let q = (0..n).map(|i| ComplexMatrix::from_row_major(k, y[i * kk..(i + 1) * kk].to_vec()).unwrap()).collect();
    (q, y[n * kk])
}

/// Integrates the Schlesinger system and `d log τ = ω` along `path`.
pub fn integrate_flow<T: Real>(state0: &SchlesingerState<T>, path: &TPath<T>, tol: T) -> Result<Flow<T>> {
    integrate_flow_kind(state0, path, tol, FlowKind::Schlesinger)
}

pub fn integrate_flow_kind<T: Real>(
    state0: &SchlesingerState<T>,
    path: &TPath<T>,
    tol: T,
    kind: FlowKind,
) -> Result<Flow<T>> {
    let n = state0.n();
    let k = state0.dim();
    if path.start().len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: path.start().len() });
    }
    if dist(path.start(), &state0.t) > T::tol(1e-12) * (T::one() + norm(&state0.t)) {
        return Err(Error::Precondition("path does not start at the state's pole loci".into()));
    }
    let sum0 = state0.residue_sum();
    let tr0 = state0.trace_powers();
    let qn0: Vec<T> = state0.q.iter().map(|q| q.norm_fro()).collect();
    let mut sum_drift = T::zero();
    let mut trace_drift = T::zero();
    let mut record = |st: &SchlesingerState<T>| {
        sum_drift = sum_drift.max(st.residue_sum().distance(&sum0));
        for (j, tr) in st.trace_powers().iter().enumerate() {
            for (m, v) in tr.iter().enumerate() {
                let sc = T::one().max(qn0[j].powi(m as i32 + 1));
                trace_drift = trace_drift.max((v - tr0[j][m]).norm() / sc);
            }
        }
    };

    let mut y = pack(&state0.q, state0.log_tau);
    let opts = OdeOptions::with_tol(tol);
    let mut stats = OdeStats { error_estimate: T::zero(), ..Default::default() };
    let mut checkpoints = vec![Checkpoint { s: T::zero(), t: state0.t.clone(), q: state0.q.clone(), log_tau: state0.log_tau }];
    let mut s_acc = T::zero();
    let mut current_t = state0.t.clone();
    for (seg, w) in path.vertices().windows(2).enumerate() {
        let len = dist(&w[0], &w[1]);
        if len == T::zero() {
            continue;
        }
        let a = w[0].clone();
        let u: Vec<C<T>> = w[0].iter().zip(&w[1]).map(|(p, q)| (q - p) / len).collect();
        let at = |s: T| -> Vec<C<T>> { a.iter().zip(&u).map(|(p, d)| p + d * s).collect() };
        let rhs = |s: T, yv: &[C<T>], dy: &mut [C<T>]| -> Result<()> {
            let (q, _) = unpack(yv, n, k);
            let st = SchlesingerState { t: at(s), q, log_tau: C::zero() };
            let dq = flow_rhs(kind, &st, &u)?;
            for (i, m) in dq.iter().enumerate() {
                dy[i * k * k..(i + 1) * k * k].copy_from_slice(m.as_slice());
            }
            dy[n * k * k] = omega_eval(&st, &u)?;
            Ok(())
        };
        let base = s_acc;
        let observer = |s: T, yv: &[C<T>]| {
            if s == T::zero() {
                return;
            }
            let (q, lt) = unpack(yv, n, k);
            let st = SchlesingerState { t: at(s), q, log_tau: lt };
            record(&st);
            checkpoints.push(Checkpoint { s: base + s, t: st.t, q: st.q, log_tau: lt });
        };
        let (end, st) = integrate(rhs, T::zero(), len, &y, &opts, observer).map_err(|e| match e {
            Error::StepUnderflow { at, .. } => Error::StepUnderflow {
                at: at + seg as f64,
                hint: " (possible crossing of the τ-divisor: residues blow up)",
            },
            e => e,
        })?;
        y = end;
        s_acc += len;
        current_t = w[1].clone();
        stats.accepted += st.accepted;
        stats.rejected += st.rejected;
        stats.evaluations += st.evaluations;
        stats.error_estimate += st.error_estimate;
    }
    let (q, log_tau) = unpack(&y, n, k);
    if q.iter().any(|m| !m.is_finite()) || !(log_tau.re.is_finite() && log_tau.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let state = SchlesingerState { t: current_t, q, log_tau };
    record(&state);
    Ok(Flow { state, checkpoints, stats, sum_drift, trace_drift, arclength: s_acc })
}

/// Residuals of the integrability identities, each relative to its natural scale.
#[derive(Clone, Debug)]
pub struct IntegrabilityReport<T> {
    /// `d(dQ_ν)(u, v)` with `dQ` substituted from the system.
    pub ce3: T,
    /// `ω_{λμ}∧ω_{μν} + ω_{μν}∧ω_{νλ} + ω_{νλ}∧ω_{λμ}`
    pub seid: T,
    /// Jacobi identity on random triples and on the residues.
    pub jacobi: T,
    pub trials: usize,
}

fn log_form<T: Real>(t: &[C<T>], l: usize, m: usize, v: &[C<T>]) -> C<T> {
    (v[l] - v[m]) / (t[l] - t[m])
}

fn wedge<T: Real>(a: (C<T>, C<T>), b: (C<T>, C<T>)) -> C<T> {
    // (α∧β)(u,v) = α(u)β(v) − α(v)β(u)
    a.0 * b.1 - a.1 * b.0
}

fn jacobi<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>, c: &ComplexMatrix<T>) -> T {
    let r = a.commutator(b).commutator(c) + b.commutator(c).commutator(a) + c.commutator(a).commutator(b);
    let s = a.norm_fro() * b.norm_fro() * c.norm_fro();
    if s == T::zero() {
        T::zero()
    } else {
        r.norm_fro() / s
    }
}

pub fn verify_integrability<T: Real>(state: &SchlesingerState<T>, trials: usize, seed: u64) -> Result<IntegrabilityReport<T>> {
    let n = state.n();
    let k = state.dim();
    let mut rng = sample::rng(seed);
    let t = &state.t;
    let mut ce3 = T::zero();
    let mut seid = T::zero();
    let mut jac = T::zero();
    let mu = state.q.iter().map(|q| q.norm_fro()).fold(T::zero(), T::max);
    for _ in 0..trials {
        let u: Vec<C<T>> = (0..n).map(|_| sample::complex(&mut rng, 1.0)).collect();
        let v: Vec<C<T>> = (0..n).map(|_| sample::complex(&mut rng, 1.0)).collect();
        let w = |l: usize, m: usize| (log_form(t, l, m, &u), log_form(t, l, m, &v));
        let wmax = (0..n)
            .flat_map(|l| (0..n).filter(move |m| *m != l).map(move |m| (l, m)))
            .map(|(l, m)| {
                let (a, b) = w(l, m);
                a.norm().max(b.norm())
            })
            .fold(T::zero(), T::max);
        for l in 0..n {
            for m in 0..n {
                for nn in 0..n {
                    if l == m || m == nn || nn == l {
                        continue;
                    }
                    let r = wedge(w(l, m), w(m, nn)) + wedge(w(m, nn), w(nn, l)) + wedge(w(nn, l), w(l, m));
                    seid = seid.max(r.norm() / (wmax * wmax));
                }
            }
        }
        let du = schlesinger_rhs(state, &u)?;
        let dv = schlesinger_rhs(state, &v)?;
        for nu in 0..n {
            let mut acc = ComplexMatrix::zeros(k);
            for m in 0..n {
                if m == nu {
                    continue;
                }
                let (wu, wv) = w(m, nu);
                // d([Q_μ,Q_ν]ω_{μν}) = ([dQ_μ,Q_ν] + [Q_μ,dQ_ν])∧ω_{μν}
                let bu = du[m].commutator(&state.q[nu]) + state.q[m].commutator(&du[nu]);
                let bv = dv[m].commutator(&state.q[nu]) + state.q[m].commutator(&dv[nu]);
                acc = acc + bu.scale(wv) - bv.scale(wu);
            }
            let sc = (mu * mu * mu * wmax * wmax).max(T::min_positive_value());
            ce3 = ce3.max(acc.norm_fro() / sc);
        }
        let a = sample::matrix(&mut rng, k, 1.0);
        let b = sample::matrix(&mut rng, k, 1.0);
        let c = sample::matrix(&mut rng, k, 1.0);
        jac = jac.max(jacobi(&a, &b, &c));
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                jac = jac.max(jacobi(&state.q[a], &state.q[b], &state.q[c]));
            }
        }
    }
    Ok(IntegrabilityReport { ce3, seid, jacobi: jac, trials })
}

fn require_zero_sum<T: Real>(state: &SchlesingerState<T>) -> Result<()> {
    let r = state.residue_sum().norm_fro();
    if r > T::tol(1e-10) * state.scale() {
        return Err(Error::ZeroSumViolated { residual: r.as_f64() });
    }
    Ok(())
}

/// `V = Σ tᵢQᵢ`, a potential: `∂V/∂tⱼ = Qⱼ` along the flow.
pub fn potential<T: Real>(state: &SchlesingerState<T>) -> Result<ComplexMatrix<T>> {
    require_zero_sum(state)?;
    Ok(state.t.iter().zip(&state.q).fold(ComplexMatrix::zeros(state.dim()), |acc, (t, q)| acc.axpy(*t, q)))
}

/// `−Y₋₁` from contour quadrature of the solution normalized at `∞`, with the
/// quadrature error estimate.
pub fn potential_via_laurent<T: Real>(
    state: &SchlesingerState<T>,
    contour_radius: T,
    nodes: usize,
    tol: T,
) -> Result<(ComplexMatrix<T>, T)> {
    require_zero_sum(state)?;
    let r = state.t.iter().map(|t| t.norm()).fold(T::zero(), T::max);
    if contour_radius <= r {
        return Err(Error::Precondition(format!(
            "contour radius {:e} must exceed max|tⱼ| = {:e}",
            contour_radius.as_f64(),
            r.as_f64()
        )));
    }
    let sys = state.system()?;
    let l = laurent_minus_one(&sys, contour_radius, nodes, tol)?;
    if l.estimate > T::tol(1e-6) * state.scale() * (T::one() + r) {
        return Err(Error::NoConvergence { what: "contour quadrature", residual: l.estimate.as_f64() });
    }
    Ok((-l.y_minus_1, l.estimate))
}

/// States at `t ± h·e_j` reached by the flow.
pub fn shifted_states<T: Real>(
    state: &SchlesingerState<T>,
    j: usize,
    h: C<T>,
    tol: T,
) -> Result<(SchlesingerState<T>, SchlesingerState<T>)> {
    if j >= state.n() {
        return Err(Error::Precondition(format!("coordinate {j} out of range")));
    }
    let go = |sign: T| -> Result<SchlesingerState<T>> {
        let mut b = state.t.clone();
        b[j] += h * sign;
        Ok(integrate_flow(state, &TPath::straight(state.t.clone(), b)?, tol)?.state)
    };
    Ok((go(T::one())?, go(-T::one())?))
}

#[derive(Clone, Debug)]
pub struct GradientReport<T> {
    pub coordinate: usize,
    pub h: T,
    /// `‖(V(t+h) − V(t−h))/2h − Qⱼ‖ / ‖Qⱼ‖`
    pub relative_error: T,
    pub relative_error_half: T,
    /// `relative_error / relative_error_half`, about 4 for a second-order difference.
    pub ratio: T,
}

/// Central-difference check of `∂V/∂tⱼ = Qⱼ` at steps `h` and `h/2`.
pub fn verify_potential_gradient<T: Real>(state: &SchlesingerState<T>, j: usize, h: T, tol: T) -> Result<GradientReport<T>> {
    require_zero_sum(state)?;
    let qn = state.q[j].norm_fro().max(T::min_positive_value());
    let err = |h: T| -> Result<T> {
        let (p, m) = shifted_states(state, j, C::new(h, T::zero()), tol)?;
        let fd = (potential(&p)? - potential(&m)?).scale_real(T::one() / (T::lit(2.0) * h));
        Ok(fd.distance(&state.q[j]) / qn)
    };
    let e1 = err(h)?;
    let e2 = err(h * T::lit(0.5))?;
    Ok(GradientReport { coordinate: j, h, relative_error: e1, relative_error_half: e2, ratio: e1 / e2 })
}

#[derive(Clone, Debug)]
pub struct DeformationReport<T> {
    pub direction: usize,
    pub h: T,
    /// Per probe: `‖∂Y/∂t_k + Q_k/(x − t_k)·Y‖ / ‖Q_k/(x − t_k)·Y‖`.
    pub residuals: Vec<T>,
    pub max_residual: T,
}

/// Central difference in `t_k` of the `∞`-normalized solution against
/// `−Q_k/(x − t_k)·Y`. Probes must lie outside the pole disk.
pub fn verify_deformation_equation<T: Real>(
    state: &SchlesingerState<T>,
    kdir: usize,
    h: T,
    probes: &[C<T>],
    tol: T,
) -> Result<DeformationReport<T>> {
    require_zero_sum(state)?;
    let (p, m) = shifted_states(state, kdir, C::new(h, T::zero()), tol)?;
    let (sp, sm, s0) = (p.system()?, m.system()?, state.system()?);
    let ytol = tol * T::lit(1e-2);
    let mut residuals = Vec::with_capacity(probes.len());
    for &x in probes {
        let y = solution_at_infinity(&s0, x, ytol)?;
        let fd = (solution_at_infinity(&sp, x, ytol)? - solution_at_infinity(&sm, x, ytol)?)
            .scale_real(T::one() / (T::lit(2.0) * h));
        let rhs = state.q[kdir].matmul(&y).scale(-(C::<T>::one() / (x - state.t[kdir])));
        let sc = rhs.norm_fro().max(T::min_positive_value());
        residuals.push(fd.distance(&rhs) / sc);
    }
    let max_residual = residuals.iter().cloned().fold(T::zero(), T::max);
    Ok(DeformationReport { direction: kdir, h, residuals, max_residual })
}

#[derive(Clone, Debug)]
pub struct IsomonodromyReport<T> {
    pub before: Vec<ComplexMatrix<T>>,
    pub after: Vec<ComplexMatrix<T>>,
    /// `‖M_{γⱼ}(B) − M_{γⱼ}(A)‖` per pole.
    pub differences: Vec<T>,
    pub max_difference: T,
    pub passed: bool,
}

/// Monodromies along the loops frozen at `a`, compared at `b`, relative to the
/// solution normalized at `∞`: `Y∞(x₀)⁻¹·M·Y∞(x₀)`. The basepoint must lie
/// outside the pole disk.
pub fn verify_isomonodromy<T: Real>(
    a: &SchlesingerState<T>,
    b: &SchlesingerState<T>,
    loops: &GeneratorLoops<T>,
    tol: T,
) -> Result<IsomonodromyReport<T>> {
    let itol = (tol * T::lit(1e-3)).max(T::tol(1e-13));
    let sa = a.system()?;
    let sb = b.system()?;
    let loops_a = loops.rebind(&a.t)?;
    let loops_b = loops.rebind(&b.t)?;
    let x0 = loops.basepoint;
    let ga = solution_at_infinity(&sa, x0, itol)?;
    let gb = solution_at_infinity(&sb, x0, itol)?;
    let to_inf = |g: &ComplexMatrix<T>, m: ComplexMatrix<T>| g.solve(&m.matmul(g));
    let before = generator_monodromies(&sa, &loops_a, itol)?.into_iter().map(|m| to_inf(&ga, m.m)).collect::<Result<Vec<_>>>()?;
    let after = generator_monodromies(&sb, &loops_b, itol)?.into_iter().map(|m| to_inf(&gb, m.m)).collect::<Result<Vec<_>>>()?;
    let differences: Vec<T> = before.iter().zip(&after).map(|(x, y)| x.distance(y)).collect();
    let max_difference = differences.iter().cloned().fold(T::zero(), T::max);
    Ok(IsomonodromyReport { before, after, differences, max_difference, passed: max_difference <= tol })
}

#[derive(Clone, Debug)]
pub struct IsoprincipalReport<T> {
    pub before: Vec<ComplexMatrix<T>>,
    pub after: Vec<ComplexMatrix<T>>,
    /// `‖A_{αⱼ}(B) − A_{αⱼ}(A)‖` per pole.
    pub differences: Vec<T>,
    pub max_difference: T,
    pub passed: bool,
}

/// Local exponents `A_{αⱼ}` at both states, with the approach paths built at `a`
/// from `x0` and reused at `b`, and the argument at `b` chosen within `π/2` of
/// the one at `a`. The connection is taken to the solution normalized at `∞`
/// (continued in from `x0`, which must lie outside the pole disk).
pub fn verify_isoprincipal_narrow<T: Real>(
    a: &SchlesingerState<T>,
    b: &SchlesingerState<T>,
    x0: C<T>,
    clearance: T,
    tol: T,
) -> Result<IsoprincipalReport<T>> {
    let itol = (tol * T::lit(1e-4)).max(T::tol(1e-13));
    let sa = a.system()?;
    let sb = b.system()?;
    let opts = LocalOptions::new(itol);
    let ga = solution_at_infinity(&sa, x0, itol)?;
    let gb = solution_at_infinity(&sb, x0, itol)?;
    let mut before = Vec::new();
    let mut after = Vec::new();
    for j in 0..a.n() {
        let alpha = approach_path(&sa, j, x0, clearance)?;
        let la = build_local_series(&sa, j, &opts)?;
        let ca = connection_data(&sa, &la, &alpha, None, itol)?;
        let alpha_b = alpha.rebind(&b.t)?;
        // the probe is fixed while tⱼ moves; certify far enough to reach it
        let reach = (alpha_b.end() - sb.pole(j)).norm() / sb.rho(j) * T::lit(1.02);
        let opts_b = LocalOptions { radius_fraction: reach.max(opts.radius_fraction).min(T::lit(0.9)), ..opts };
        let lb = build_local_series(&sb, j, &opts_b)?;
        let cb = connection_data(&sb, &lb, &alpha_b, Some(ca.arg), itol)?;
        // exponents relative to the solution normalized at ∞
        let c_inf_a = ca.c.matmul(&ga);
        let c_inf_b = cb.c.matmul(&gb);
        before.push(c_inf_a.solve(&sa.residue(j).matmul(&c_inf_a))?);
        after.push(c_inf_b.solve(&sb.residue(j).matmul(&c_inf_b))?);
    }
    let differences: Vec<T> = before.iter().zip(&after).map(|(x, y)| x.distance(y)).collect();
    let max_difference = differences.iter().cloned().fold(T::zero(), T::max);
    Ok(IsoprincipalReport { before, after, differences, max_difference, passed: max_difference <= tol })
}

/// Adds `amount·scale·Rⱼ` with random `Rⱼ`, `Σ Rⱼ = 0`: a state off the flow.
pub fn perturb_off_flow<T: Real>(state: &SchlesingerState<T>, amount: f64, seed: u64) -> SchlesingerState<T> {
    let mut rng = sample::rng(seed);
    let k = state.dim();
    let n = state.n();
    let sc = state.scale().as_f64() * amount;
    let mut r: Vec<ComplexMatrix<T>> = (0..n).map(|_| sample::matrix(&mut rng, k, sc)).collect();
    let mean = r.iter().fold(ComplexMatrix::zeros(k), |a, m| a + m).scale_real(T::one() / T::from_count(n));
    for m in r.iter_mut() {
        *m = &*m - &mean;
    }
    SchlesingerState { t: state.t.clone(), q: state.q.iter().zip(&r).map(|(q, d)| q + d).collect(), log_tau: state.log_tau }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    type M = ComplexMatrix<f64>;

    fn c(re: f64, im: f64) -> C<f64> {
        Complex::new(re, im)
    }

    fn seed_state(seed: u64) -> SchlesingerState<f64> {
        let mut r = sample::rng(seed);
        SchlesingerState::from_system(&sample::zero_sum_system(&mut r, 2, 3, 0.4, 0.05))
    }

    #[test]
    fn commuting_rhs_vanishes() {
        let mut r = sample::rng(1);
        let s = SchlesingerState::from_system(&sample::commuting_system::<f64, _>(&mut r, 3, 3, 0.5));
        let dq = schlesinger_rhs(&s, &[c(1.0, 0.0), c(0.3, 0.2), c(-1.0, 0.5)]).unwrap();
        assert!(dq.iter().all(|m| m.max_abs() == 0.0));
    }

    #[test]
    fn two_pole_coordinate_direction() {
        let q1 = M::from_real_rows(&[vec![0.1, 0.4], vec![0.2, -0.3]]).unwrap();
        let q2 = M::from_real_rows(&[vec![0.5, -0.1], vec![0.3, 0.2]]).unwrap();
        let s = SchlesingerState::new(vec![c(0.0, 0.0), c(1.5, 0.5)], vec![q1.clone(), q2.clone()]).unwrap();
        let dq = schlesinger_rhs(&s, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let expect = q1.commutator(&q2).scale(-(C::<f64>::one() / (s.t[0] - s.t[1])));
        assert!(dq[0].distance(&expect) < 1e-15);
        assert!((dq[0].clone() + &dq[1]).max_abs() < 1e-15);
    }

    #[test]
    fn rhs_sums_to_zero() {
        let s = seed_state(3);
        let dq = schlesinger_rhs(&s, &[c(0.3, -0.1), c(1.0, 0.2), c(-0.4, 0.9)]).unwrap();
        assert!(dq.iter().fold(M::zeros(2), |a, m| a + m).max_abs() < 1e-15);
    }

    #[test]
    fn commuting_flow_is_constant() {
        let mut r = sample::rng(2);
        let s = SchlesingerState::from_system(&sample::commuting_system::<f64, _>(&mut r, 2, 3, 0.5));
        let mut b = s.t.clone();
        b[0] += c(0.2, 0.1);
        let f = integrate_flow(&s, &TPath::straight(s.t.clone(), b).unwrap(), 1e-10).unwrap();
        for (x, y) in f.state.q.iter().zip(&s.q) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn homotopic_paths_agree() {
        let s = seed_state(4);
        let a = s.t.clone();
        let mut b = a.clone();
        b[0] += c(0.3, 0.2);
        b[2] += c(-0.1, 0.25);
        let mut mid = a.clone();
        mid[0] += c(0.3, -0.1);
        let tol = 1e-11;
        let f1 = integrate_flow(&s, &TPath::straight(a.clone(), b.clone()).unwrap(), tol).unwrap();
        let f2 = integrate_flow(&s, &TPath::from_vertices(vec![a, mid, b]).unwrap(), tol).unwrap();
        let d = f1.state.q.iter().zip(&f2.state.q).map(|(x, y)| x.distance(y)).fold(0.0, f64::max);
        assert!(d <= 5e-9, "{d}");
        assert!(f1.sum_drift <= 1e-12);
        assert!(f1.trace_drift <= 1e-9);
    }

    #[test]
    fn collision_refused() {
        let r = TPath::straight(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(r, Err(Error::NearCollision { .. })));
    }

    #[test]
    fn identities_vanish() {
        let r = verify_integrability(&seed_state(5), 10, 9).unwrap();
        assert!(r.seid <= 1e-12, "{}", r.seid);
        assert!(r.ce3 <= 1e-10, "{}", r.ce3);
        assert!(r.jacobi <= 1e-14, "{}", r.jacobi);
    }

    #[test]
    fn scalar_potential() {
        let s = SchlesingerState::new(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![M::scalar(1, c(0.3, 0.0)), M::scalar(1, c(-0.3, 0.0))])
            .unwrap();
        assert!((potential(&s).unwrap()[(0, 0)] - c(-0.3, 0.0)).norm() < 1e-15);
        let (v, _) = potential_via_laurent(&s, 3.0, 32, 1e-12).unwrap();
        assert!((v[(0, 0)] - c(-0.3, 0.0)).norm() < 1e-9);
        let z = SchlesingerState::new(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![M::zeros(2), M::zeros(2)]).unwrap();
        assert_eq!(potential(&z).unwrap(), M::zeros(2));
    }

    #[test]
    fn zero_length_isomonodromy() {
        let s = seed_state(6);
        let sys = s.system().unwrap();
        let x0 = crate::path::choose_basepoint(&sys);
        let loops = crate::path::generator_loops(&sys, x0, crate::path::default_loop_clearance(&sys)).unwrap();
        let r = verify_isomonodromy(&s, &s, &loops, 1e-6).unwrap();
        assert_eq!(r.max_difference, 0.0);
    }
}
