//! Polyline paths avoiding the poles, continuation of solutions along them,
//! monodromy matrices and generator loops of the punctured plane.

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::fuchsian::FuchsianSystem;
use crate::linalg::ComplexMatrix;
use crate::ode::{integrate, OdeOptions, OdeStats};
use crate::scalar::{Real, C};

/// Fraction of a path's clearance that moved poles must still respect.
pub const REBIND_FLOOR: f64 = 0.1;

/// Vertices of the polygon used for generator circles.
pub const LOOP_POLYGON_VERTICES: usize = 64;

/// Distance from `t` to the segment `[a, b]`.
pub fn segment_distance<T: Real>(a: C<T>, b: C<T>, t: C<T>) -> T {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == T::zero() {
        return (t - a).norm();
    }
    let s = ((t - a) * d.conj()).re / l2;
    let s = s.max(T::zero()).min(T::one());
    (a + d * s - t).norm()
}

/// Default clearance `δ_min = gap·max(1e-3, min(10·tol^{1/5}, 0.1))`.
pub fn default_clearance<T: Real>(system: &FuchsianSystem<T>, tol: T) -> T {
    let gap = if system.n_poles() > 1 { system.min_gap() } else { system.length_scale() };
    let f = (T::lit(10.0) * tol.powf(T::lit(0.2))).min(T::lit(0.1)).max(T::lit(1e-3));
    gap * f
}

/// A polyline with the continuous argument of `x − tⱼ` recorded at every vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct PathPlan<T> {
    vertices: Vec<C<T>>,
    poles: Vec<C<T>>,
    /// `ledger[j][v]` is `arg(vertex_v − tⱼ)`.
    ledger: Vec<Vec<T>>,
    clearance: T,
}

impl<T: Real> PathPlan<T> {
    /// Checks every segment against every pole; the arguments start on the principal branch.
    pub fn new(system: &FuchsianSystem<T>, vertices: Vec<C<T>>, clearance: T) -> Result<Self> {
        Self::with_poles(system.poles(), vertices, clearance)
    }

    pub fn with_poles(poles: &[C<T>], vertices: Vec<C<T>>, clearance: T) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Precondition("path needs at least one vertex".into()));
        }
        if vertices.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        for (j, t) in poles.iter().enumerate() {
            let d0 = (vertices[0] - t).norm();
            if d0 < clearance {
                return Err(Error::PathTooClose { segment: 0, pole: j, distance: d0.as_f64(), required: clearance.as_f64() });
            }
            for (s, w) in vertices.windows(2).enumerate() {
                let d = segment_distance(w[0], w[1], *t);
                if d < clearance {
                    return Err(Error::PathTooClose { segment: s, pole: j, distance: d.as_f64(), required: clearance.as_f64() });
                }
            }
        }
        let ledger = poles
            .iter()
            .map(|t| {
                let mut args = Vec::with_capacity(vertices.len());
                let mut a = (vertices[0] - t).arg();
                args.push(a);
                for w in vertices.windows(2) {
                    a = a + ((w[1] - t) / (w[0] - t)).arg();
                    args.push(a);
                }
                args
            })
            .collect();
        Ok(Self { vertices, poles: poles.to_vec(), ledger, clearance })
    }

    /// Path validated with [`default_clearance`].
    pub fn with_default_clearance(system: &FuchsianSystem<T>, vertices: Vec<C<T>>, tol: T) -> Result<Self> {
        Self::new(system, vertices, default_clearance(system, tol))
    }

    /// Straight segment.
    pub fn segment(system: &FuchsianSystem<T>, a: C<T>, b: C<T>, clearance: T) -> Result<Self> {
        Self::new(system, vec![a, b], clearance)
    }

    /// The same vertices against other pole loci. Moved poles may come closer
    /// than the original clearance, down to `REBIND_FLOOR` of it.
    pub fn rebind(&self, poles: &[C<T>]) -> Result<Self> {
        let floor = self.clearance * T::lit(REBIND_FLOOR);
        let mut p = Self::with_poles(poles, self.vertices.clone(), floor)?;
        p.clearance = self.min_distance_to(poles).min(self.clearance);
        Ok(p)
    }

    /// Smallest distance from the polyline to any of `poles`.
    pub fn min_distance_to(&self, poles: &[C<T>]) -> T {
        let mut m = T::infinity();
        for t in poles {
            m = m.min((self.vertices[0] - t).norm());
            for w in self.vertices.windows(2) {
                m = m.min(segment_distance(w[0], w[1], *t));
            }
        }
        m
    }

    pub fn vertices(&self) -> &[C<T>] {
        &self.vertices
    }

    pub fn poles(&self) -> &[C<T>] {
        &self.poles
    }

    pub fn clearance(&self) -> T {
        self.clearance
    }

    pub fn start(&self) -> C<T> {
        self.vertices[0]
    }

    pub fn end(&self) -> C<T> {
        *self.vertices.last().unwrap()
    }

    pub fn arclength(&self) -> T {
        self.vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    pub fn is_closed(&self) -> bool {
        (self.start() - self.end()).norm() <= T::tol(1e-12) * (T::one() + self.start().norm())
    }

    /// Continuous `arg(x − tⱼ)` at every vertex.
    pub fn ledger(&self, j: usize) -> &[T] {
        &self.ledger[j]
    }

    pub fn start_arg(&self, j: usize) -> T {
        self.ledger[j][0]
    }

    pub fn end_arg(&self, j: usize) -> T {
        *self.ledger[j].last().unwrap()
    }

    /// Net turns around `tⱼ` (real; integral for closed paths).
    pub fn turns(&self, j: usize) -> T {
        (self.end_arg(j) - self.start_arg(j)) / T::TAU()
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Self::with_poles(&self.poles, v, self.clearance).expect("reversal keeps clearance")
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let tol = T::lit(1e-12) * (T::one() + self.end().norm());
        if (self.end() - other.start()).norm() > tol {
            return Err(Error::Precondition("paths do not join".into()));
        }
        let mut v = self.vertices.clone();
        v.extend_from_slice(&other.vertices[1..]);
        Self::with_poles(&self.poles, v, self.clearance.min(other.clearance))
    }

    /// Splits at vertex `i` (shared by both halves).
    pub fn split_at(&self, i: usize) -> Result<(Self, Self)> {
        if i >= self.vertices.len() {
            return Err(Error::Precondition("split index out of range".into()));
        }
        let a = Self::with_poles(&self.poles, self.vertices[..=i].to_vec(), self.clearance)?;
        let b = Self::with_poles(&self.poles, self.vertices[i..].to_vec(), self.clearance)?;
        Ok((a, b))
    }
}

/// Closed path with integral winding numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopPlan<T> {
    path: PathPlan<T>,
    winding: Vec<i64>,
    /// Pole this loop is a generator for.
    pub target: Option<usize>,
    /// Position in the configuration order of the generating relation.
    pub position: Option<usize>,
}

impl<T: Real> LoopPlan<T> {
    pub fn new(path: PathPlan<T>) -> Result<Self> {
        if !path.is_closed() {
            return Err(Error::Precondition("loop is not closed".into()));
        }
        let mut winding = Vec::with_capacity(path.poles.len());
        for j in 0..path.poles.len() {
            let w = path.turns(j);
            let r = w.round();
            if (w - r).abs() > T::tol(1e-9) {
                return Err(Error::Precondition(format!("non-integral winding {} around pole {j}", w.as_f64())));
            }
            winding.push(r.to_i64().unwrap_or(0));
        }
        Ok(Self { path, winding, target: None, position: None })
    }

    pub fn path(&self) -> &PathPlan<T> {
        &self.path
    }

    pub fn basepoint(&self) -> C<T> {
        self.path.start()
    }

    pub fn winding(&self) -> &[i64] {
        &self.winding
    }

    /// The same loop against moved poles; rejects the move if any winding number changes.
    pub fn rebind(&self, poles: &[C<T>], loop_index: usize) -> Result<Self> {
        let path = match self.path.rebind(poles) {
            Ok(p) => p,
            Err(Error::PathTooClose { pole, .. }) => return Err(Error::LoopCrossing { pole, loop_index }),
            Err(e) => return Err(e),
        };
        let next = Self { target: self.target, position: self.position, ..Self::new(path)? };
        for (pole, (a, b)) in self.winding.iter().zip(&next.winding).enumerate() {
            if a != b {
                return Err(Error::LoopCrossing { pole, loop_index });
            }
        }
        Ok(next)
    }

    /// `self` then `other`; its monodromy is `M_other·M_self`.
    pub fn then(&self, other: &Self) -> Result<Self> {
        Self::new(self.path.concat(&other.path)?)
    }
}

/// Endpoint of a continuation.
#[derive(Clone, Debug)]
pub struct Continuation<T> {
    pub y: ComplexMatrix<T>,
    /// `∫ tr A(x) dx`, the continuous logarithm of `det Y(end)/det Y(start)`.
    pub log_det: C<T>,
    /// `|det Y(end) − det Y(start)·e^{log_det}|` relative to `|det Y(end)|`.
    pub det_residual: T,
    pub stats: OdeStats<T>,
}

/// Continues `Y` from the start of `path` to its end.
pub fn continue_solution<T: Real>(
    system: &FuchsianSystem<T>,
    path: &PathPlan<T>,
    y0: &ComplexMatrix<T>,
    tol: T,
) -> Result<Continuation<T>> {
    let k = system.dim();
    if y0.dim() != k {
        return Err(Error::DimensionMismatch { expected: k, found: y0.dim() });
    }
    if path.poles() != system.poles() {
        return Err(Error::Precondition("path was planned for different pole loci".into()));
    }
    let mut state: Vec<C<T>> = y0.as_slice().to_vec();
    state.push(C::zero());
    let opts = OdeOptions::with_tol(tol);
    let mut stats = OdeStats { error_estimate: T::zero(), ..Default::default() };
    let kk = k * k;
    for (seg, w) in path.vertices().windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let len = (b - a).norm();
        if len == T::zero() {
            continue;
        }
        let u = (b - a) / len;
        let rhs = |s: T, y: &[C<T>], dy: &mut [C<T>]| -> Result<()> {
            let x = a + u * s;
            let coef = system.coefficient_unchecked(x);
            for i in 0..k {
                for j in 0..k {
                    let mut acc = C::<T>::zero();
                    for m in 0..k {
                        acc += coef[(i, m)] * y[m * k + j];
                    }
                    dy[i * k + j] = acc * u;
                }
            }
            dy[kk] = coef.trace() * u;
            Ok(())
        };
        let (end, st) = integrate(rhs, T::zero(), len, &state, &opts, |_, _| {}).map_err(|e| match e {
            Error::StepUnderflow { at, .. } => Error::StepUnderflow { at: at + seg as f64, hint: " (segment passes near a pole)" },
            e => e,
        })?;
        state = end;
        stats.accepted += st.accepted;
        stats.rejected += st.rejected;
        stats.evaluations += st.evaluations;
        stats.error_estimate += st.error_estimate;
    }
    let log_det = state[kk];
    let y = ComplexMatrix::from_row_major(k, state[..kk].to_vec())?;
    if !y.is_finite() {
        return Err(Error::NonFinite);
    }
    let det_end = y.det();
    let predicted = y0.det() * log_det.exp();
    let det_residual = (det_end - predicted).norm() / det_end.norm().max(T::min_positive_value());
    Ok(Continuation { y, log_det, det_residual, stats })
}

/// Monodromy along a loop, with the data it was computed from.
#[derive(Clone, Debug)]
pub struct MonodromyMatrix<T> {
    pub m: ComplexMatrix<T>,
    pub winding: Vec<i64>,
    pub tol: T,
    pub det_residual: T,
    pub error_estimate: T,
}

/// `M = Y(end)` for the solution with `Y(x₀) = I`.
pub fn monodromy<T: Real>(system: &FuchsianSystem<T>, lp: &LoopPlan<T>, tol: T) -> Result<MonodromyMatrix<T>> {
    let c = continue_solution(system, lp.path(), &ComplexMatrix::identity(system.dim()), tol)?;
    Ok(MonodromyMatrix {
        m: c.y,
        winding: lp.winding().to_vec(),
        tol,
        det_residual: c.det_residual,
        error_estimate: c.stats.error_estimate,
    })
}

/// Generator loops with their configuration order.
#[derive(Clone, Debug)]
pub struct GeneratorLoops<T> {
    /// `loops[j]` goes once counterclockwise around pole `j`.
    pub loops: Vec<LoopPlan<T>>,
    /// Pole indices in traversal order `π(1), …, π(n)`: the loop going around all
    /// poles is `γ_{π(1)}` followed by `γ_{π(2)}` and so on, hence
    /// `M_{π(n)}⋯M_{π(1)} = I` when infinity is regular.
    pub order: Vec<usize>,
    pub basepoint: C<T>,
    pub clearance: T,
}

impl<T: Real> GeneratorLoops<T> {
    /// `M_{π(n)}⋯M_{π(1)}` for monodromies indexed by pole.
    pub fn ordered_product(&self, monodromies: &[ComplexMatrix<T>]) -> ComplexMatrix<T> {
        let k = monodromies.first().map_or(0, |m| m.dim());
        self.order.iter().fold(ComplexMatrix::identity(k), |acc, &j| monodromies[j].matmul(&acc))
    }

    /// Loops re-checked against moved poles; each pole must stay within the
    /// circle radius of where the loops were built.
    pub fn rebind(&self, poles: &[C<T>]) -> Result<Self> {
        if let Some(first) = self.loops.first() {
            for (j, (a, b)) in first.path().poles().iter().zip(poles).enumerate() {
                if (a - b).norm() >= self.clearance {
                    return Err(Error::LoopCrossing { pole: j, loop_index: j });
                }
            }
        }
        let loops = self.loops.iter().enumerate().map(|(i, l)| l.rebind(poles, i)).collect::<Result<Vec<_>>>()?;
        Ok(Self { loops, ..self.clone() })
    }
}

fn spoke_blockage<T: Real>(poles: &[C<T>], x0: C<T>, j: usize, clearance: T) -> T {
    let t = poles[j];
    let dir = (x0 - t) / (x0 - t).norm();
    let p = t + dir * clearance;
    poles
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != j)
        .map(|(_, s)| segment_distance(x0, p, *s))
        .fold(T::infinity(), T::min)
}

/// Spoke–circle–spoke loops around every pole. `clearance` is the circle
/// radius; spokes are ordered by angle starting after the widest angular gap.
pub fn generator_loops<T: Real>(system: &FuchsianSystem<T>, x0: C<T>, clearance: T) -> Result<GeneratorLoops<T>> {
    let poles = system.poles();
    let n = poles.len();
    if !(clearance > T::zero()) {
        return Err(Error::ClearanceInfeasible("clearance must be positive".into()));
    }
    if n > 1 && clearance >= system.min_gap() * T::lit(0.5) {
        return Err(Error::ClearanceInfeasible(format!(
            "clearance {:e} is not below half the minimal pole gap {:e}",
            clearance.as_f64(),
            system.min_gap().as_f64()
        )));
    }
    for (j, t) in poles.iter().enumerate() {
        if (x0 - t).norm() <= clearance * T::lit(1.5) {
            return Err(Error::ClearanceInfeasible(format!("basepoint lies within 1.5 clearances of pole {j}")));
        }
        let b = spoke_blockage(poles, x0, j, clearance);
        if b < clearance {
            return Err(Error::ClearanceInfeasible(format!(
                "spoke to pole {j} passes within {:e} of another pole",
                b.as_f64()
            )));
        }
    }
    let nv = LOOP_POLYGON_VERTICES;
    let delta = clearance * (T::PI() / T::from_count(nv)).cos() * T::lit(0.999);
    let mut loops = Vec::with_capacity(n);
    for (j, t) in poles.iter().enumerate() {
        let phi0 = (x0 - t).arg();
        let mut v = vec![x0];
        for m in 0..=nv {
            let phi = phi0 + T::TAU() * T::from_count(m) / T::from_count(nv);
            v.push(t + Complex::from_polar(clearance, phi));
        }
        v.push(x0);
        let path = PathPlan::new(system, v, delta)?;
        let mut lp = LoopPlan::new(path)?;
        lp.target = Some(j);
        if lp.winding().iter().enumerate().any(|(p, &w)| w != i64::from(p == j)) {
            return Err(Error::ClearanceInfeasible(format!("loop {j} does not isolate its pole")));
        }
        loops.push(lp);
    }
    // order by spoke angle, starting after the widest gap
    let mut ang: Vec<(T, usize)> = poles.iter().enumerate().map(|(j, t)| ((t - x0).arg(), j)).collect();
    ang.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut start = 0;
    let mut widest = T::neg_infinity();
    for i in 0..n {
        let next = if i + 1 < n { ang[i + 1].0 } else { ang[0].0 + T::TAU() };
        let gap = next - ang[i].0;
        if gap > widest {
            widest = gap;
            start = (i + 1) % n;
        }
    }
    let order: Vec<usize> = (0..n).map(|i| ang[(start + i) % n].1).collect();
    for (pos, &j) in order.iter().enumerate() {
        loops[j].position = Some(pos);
    }
    Ok(GeneratorLoops { loops, order, basepoint: x0, clearance })
}

/// A basepoint outside the pole configuration, and outside the disk `|x| ≤ 1.1·max|tⱼ|`,
/// from which every spoke is unobstructed.
pub fn choose_basepoint<T: Real>(system: &FuchsianSystem<T>) -> C<T> {
    let poles = system.poles();
    let n = T::from_count(poles.len());
    let centre = poles.iter().fold(C::<T>::zero(), |a, t| a + t) / n;
    let spread = poles.iter().map(|t| (t - centre).norm()).fold(T::zero(), T::max);
    let gap = if poles.len() > 1 { system.min_gap() } else { T::one() };
    let outside = poles.iter().map(|t| t.norm()).fold(T::zero(), T::max) * T::lit(1.1) + centre.norm();
    let radius = (spread * T::lit(1.5) + gap).max(outside);
    let clearance = gap * T::lit(0.25);
    let mut best = (T::neg_infinity(), centre + radius);
    for m in 0..97 {
        // irrational-ish offset avoids symmetric alignments
        let th = T::lit(-1.3) + T::TAU() * T::from_count(m) / T::lit(97.0);
        let x0 = centre + Complex::from_polar(radius, th);
        let score = (0..poles.len())
            .map(|j| spoke_blockage(poles, x0, j, clearance))
            .fold(T::infinity(), T::min);
        if score > best.0 {
            best = (score, x0);
        }
    }
    best.1
}

/// Default generator circle radius: a quarter of the minimal gap.
pub fn default_loop_clearance<T: Real>(system: &FuchsianSystem<T>) -> T {
    if system.n_poles() > 1 {
        system.min_gap() * T::lit(0.25)
    } else {
        system.length_scale() * T::lit(0.25)
    }
}

/// Monodromies of all generator loops, indexed by pole.
pub fn generator_monodromies<T: Real>(
    system: &FuchsianSystem<T>,
    loops: &GeneratorLoops<T>,
    tol: T,
) -> Result<Vec<MonodromyMatrix<T>>> {
    loops.loops.iter().map(|l| monodromy(system, l, tol)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = ComplexMatrix<f64>;

    fn c(re: f64, im: f64) -> C<f64> {
        Complex::new(re, im)
    }

    fn scalar_pair(q: f64) -> FuchsianSystem<f64> {
        FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![M::scalar(1, c(q, 0.0)), M::scalar(1, c(-q, 0.0))])
            .unwrap()
    }

    #[test]
    fn zero_residues_leave_solution_fixed() {
        let s = FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![M::zeros(2), M::zeros(2)]).unwrap();
        let p = PathPlan::new(&s, vec![c(2.0, 0.0), c(0.5, 2.0), c(-1.0, -1.0)], 0.1).unwrap();
        let y0 = M::from_real_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let r = continue_solution(&s, &p, &y0, 1e-10).unwrap();
        assert!(r.y.distance(&y0) < 1e-14);
    }

    #[test]
    fn scalar_closed_form() {
        let s = scalar_pair(0.5);
        let p = PathPlan::new(&s, vec![c(3.0, 0.0), c(5.0, 0.0)], 0.1).unwrap();
        let r = continue_solution(&s, &p, &M::identity(1), 1e-12).unwrap();
        assert!((r.y[(0, 0)] - c((5.0f64 / 6.0).sqrt(), 0.0)).norm() < 1e-10);
    }

    #[test]
    fn reversal_composes_to_identity() {
        let q = M::from_real_rows(&[vec![0.3, 0.5], vec![-0.2, 0.1]]).unwrap();
        let s = FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![q.clone(), -&q]).unwrap();
        let p = PathPlan::new(&s, vec![c(2.0, 1.0), c(0.5, 2.0), c(-1.0, 0.5)], 0.1).unwrap();
        let tol = 1e-10;
        let fwd = continue_solution(&s, &p, &M::identity(2), tol).unwrap();
        let back = continue_solution(&s, &p.reversed(), &fwd.y, tol).unwrap();
        assert!(back.y.distance(&M::identity(2)) < 2.0 * tol * 10.0);
    }

    #[test]
    fn scalar_monodromy_is_minus_one() {
        let s = scalar_pair(0.5);
        let g = generator_loops(&s, c(0.5, -2.0), 0.25).unwrap();
        let m = monodromy(&s, &g.loops[0], 1e-11).unwrap();
        assert!((m.m[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-8);
        assert_eq!(m.winding, vec![1, 0]);
    }

    #[test]
    fn collinear_winding_matrix() {
        let s = FuchsianSystem::zero_sum(
            vec![c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)],
            vec![M::zeros(1), M::zeros(1), M::zeros(1)],
        )
        .unwrap();
        let x0 = choose_basepoint(&s);
        let g = generator_loops(&s, x0, 0.2).unwrap();
        for (j, l) in g.loops.iter().enumerate() {
            let e: Vec<i64> = (0..3).map(|p| i64::from(p == j)).collect();
            assert_eq!(l.winding(), e.as_slice());
        }
        let g2 = generator_loops(&s, x0 + c(0.05, 0.05), 0.2).unwrap();
        for (a, b) in g.loops.iter().zip(&g2.loops) {
            assert_eq!(a.winding(), b.winding());
        }
    }

    #[test]
    fn single_pole_loop() {
        let s = FuchsianSystem::zero_sum(vec![c(0.0, 0.0)], vec![M::zeros(2)]).unwrap();
        let g = generator_loops(&s, c(2.0, 0.0), 0.5).unwrap();
        assert_eq!(g.loops[0].winding(), &[1]);
        let m = monodromy(&s, &g.loops[0], 1e-10).unwrap();
        assert!(m.m.distance(&M::identity(2)) < 1e-14);
    }

    #[test]
    fn too_close_path_rejected() {
        let s = scalar_pair(0.5);
        let r = PathPlan::new(&s, vec![c(-1.0, 0.01), c(2.0, 0.01)], 0.1);
        assert!(matches!(r, Err(Error::PathTooClose { .. })));
    }

    #[test]
    fn clearance_infeasible() {
        let s = scalar_pair(0.5);
        assert!(matches!(generator_loops(&s, c(0.5, -2.0), 0.6), Err(Error::ClearanceInfeasible(_))));
    }
}
