//! Normalized local solutions `Yⱼ = Hⱼ(x)(x − tⱼ)^{Qⱼ}` at non-resonant poles.
//!
//! `H = Σ Ψᵣ(x − tⱼ)ʳ` with `Ψ₀ = I` solves
//! `(r+1)Ψᵣ₊₁ − [Qⱼ, Ψᵣ₊₁] = Σ_{l+m=r} ΦₗΨₘ`, where `Φ` is the Taylor
//! expansion of the remaining poles. Truncation is certified by
//! `‖Ψᵣ‖ ≤ √k (r+1)^{d−1} ρ^{−r}`.

use num_complex::Complex;
use num_traits::One;

use crate::error::{Error, Result};
use crate::fuchsian::{FuchsianSystem, DEFAULT_RESONANCE_MARGIN};
use crate::linalg::{exp_two_pi_i, power_base, AdResolvent, BranchedBase, ComplexMatrix};
use crate::path::{continue_solution, segment_distance, LoopPlan, PathPlan};
use crate::scalar::{re, Real, C};

/// Taylor coefficients of `Σ_{p≠j} Qₚ/(x − tₚ)` at `tⱼ`.
#[derive(Clone, Debug)]
pub struct PerturbationSeries<T> {
    pub phi: Vec<ComplexMatrix<T>>,
    pub rho: T,
    /// `‖Φᵣ‖ ≤ C₁ ρ^{−r}`
    pub c1: T,
}

/// `Φᵣ = −Σ_{p≠j} Qₚ/(tₚ − tⱼ)^{r+1}` for `r = 0..=orders`.
pub fn perturbation_series<T: Real>(system: &FuchsianSystem<T>, j: usize, orders: usize) -> Result<PerturbationSeries<T>> {
    system.check_index(j)?;
    let k = system.dim();
    let tj = system.pole(j);
    let mut phi = vec![ComplexMatrix::zeros(k); orders + 1];
    let mut c1 = T::zero();
    for (p, (tp, qp)) in system.poles().iter().zip(system.residues()).enumerate() {
        if p == j {
            continue;
        }
        let d = tp - tj;
        c1 += qp.norm_fro() / d.norm();
        let inv = C::<T>::one() / d;
        let mut w = inv;
        for ph in phi.iter_mut() {
            *ph = ph.axpy(-w, qp);
            w *= inv;
        }
    }
    let rho = system.rho(j);
    Ok(PerturbationSeries { phi, rho, c1 })
}

/// Construction settings.
#[derive(Clone, Copy, Debug)]
pub struct LocalOptions<T> {
    /// Target for the certified truncation tail on `|x − tⱼ| ≤ radius_fraction·ρ`.
    pub tol: T,
    /// Smallest admissible separation of eigenvalue differences from nonzero integers.
    pub epsilon: T,
    pub radius_fraction: T,
    pub max_order: usize,
}

impl<T: Real> LocalOptions<T> {
    pub fn new(tol: T) -> Self {
        Self { tol, epsilon: T::lit(DEFAULT_RESONANCE_MARGIN), radius_fraction: T::lit(0.5), max_order: 4000 }
    }
}

/// Truncated normalized local solution.
#[derive(Clone, Debug)]
pub struct LocalSolution<T> {
    pub pole: usize,
    pub center: C<T>,
    pub q: ComplexMatrix<T>,
    pub psi: Vec<ComplexMatrix<T>>,
    pub phi: Vec<ComplexMatrix<T>>,
    pub rho: T,
    pub c1: T,
    /// Integer separation of `Qⱼ` (the `ε` of the bounds).
    pub epsilon: T,
    /// `max_r (r+2)·‖(r+1 − ad_Q)⁻¹‖`
    pub c_sharp: T,
    /// `ρ·C₁·C_sharp`, the exponent constant used for certification.
    pub d: T,
    /// `ρ·C₁·C(ε, μ, k)` with the explicit constant of the refined Sylvester estimate.
    pub d_explicit: T,
    pub certified_order: usize,
    pub empirical_order: usize,
    /// Largest recursion residual, relative to the right-hand side scale.
    pub max_residual: T,
    pub radius: T,
    pub tol: T,
    resolvent: AdResolvent<T>,
}

/// `√k Σ_{r>N} (r+1)^{d−1} sʳ`, evaluated in double precision.
pub fn certified_tail(k: usize, d: f64, s: f64, n: usize) -> f64 {
    let mut sum = 0.0;
    let ls = s.ln();
    let peak = if ls < 0.0 { ((d - 1.0) / -ls).max(0.0) } else { f64::INFINITY };
    let mut r = n + 1;
    loop {
        let t = ((d - 1.0) * ((r + 1) as f64).ln() + r as f64 * ls).exp();
        sum += t;
        if (r as f64) > peak + 10.0 && t <= 1e-18 * sum.max(1e-300) {
            break;
        }
        if t == 0.0 && (r as f64) > peak {
            break;
        }
        r += 1;
        if r > n + 10_000_000 {
            return f64::INFINITY;
        }
    }
    (k as f64).sqrt() * sum
}

/// Smallest `N ≤ max_order` with `certified_tail(N) ≤ tol`.
fn certified_order(k: usize, d: f64, s: f64, tol: f64, max_order: usize) -> Option<usize> {
    // tail is non-increasing in N; bisect
    if certified_tail(k, d, s, max_order) > tol {
        return None;
    }
    let (mut lo, mut hi) = (0usize, max_order);
    if certified_tail(k, d, s, 0) <= tol {
        return Some(0);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if certified_tail(k, d, s, mid) <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// `max_{r≥0} (r+2)‖(r+1 − ad_Q)⁻¹‖`: exact resolvent norms up to `λ = ⌈3μ⌉+1`,
/// the Neumann-series estimate `(λ+1)/(λ−2μ)` beyond.
pub fn sharp_sylvester_constant<T: Real>(res: &AdResolvent<T>) -> Result<T> {
    let mu = res.q().norm_fro();
    let l = (T::lit(3.0) * mu).ceil().to_usize().unwrap_or(0) + 1;
    let mut c = T::zero();
    for lam in 1..=l {
        let lf = T::from_count(lam);
        c = c.max((lf + T::one()) * res.resolvent_norm(re(lf))?);
    }
    let lf = T::from_count(l + 1);
    c = c.max((lf + T::one()) / (lf - T::lit(2.0) * mu));
    Ok(c)
}

/// Recursion `λ = r + 1` for both the forward and inverse series.
fn next_coefficient<T: Real>(
    res: &AdResolvent<T>,
    r: usize,
    rhs: &ComplexMatrix<T>,
    epsilon: T,
) -> Result<(ComplexMatrix<T>, T)> {
    let sol = res.solve(re(T::from_count(r + 1)), rhs, epsilon)?;
    let scale = rhs.norm_fro().max(sol.x.norm_fro()).max(T::min_positive_value());
    Ok((sol.x, sol.residual / scale))
}

/// Builds the normalized local solution at pole `j`.
pub fn build_local_series<T: Real>(system: &FuchsianSystem<T>, j: usize, opts: &LocalOptions<T>) -> Result<LocalSolution<T>> {
    system.check_index(j)?;
    let k = system.dim();
    let q = system.residue(j).clone();
    let report = system.resonance_report(j)?;
    if report.margin < opts.epsilon {
        let (re_, im_) = report
            .eigenvalues
            .iter()
            .flat_map(|a| report.eigenvalues.iter().map(move |b| a - b))
            .map(|d| (d, (d - d.re.round()).norm()))
            .filter(|(d, _)| d.re.round() != T::zero())
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(d, _)| (d.re.as_f64(), d.im.as_f64()))
            .unwrap_or((0.0, 0.0));
        return Err(Error::Resonance { re: re_, im: im_, distance: report.margin.as_f64(), margin: opts.epsilon.as_f64() });
    }
    let epsilon = report.margin.min(T::one());
    let res = AdResolvent::new(&q)?;
    let pert = perturbation_series(system, j, 0)?;
    let rho = pert.rho;
    let c1 = pert.c1;
    let mu = q.norm_fro();
    let c_sharp = sharp_sylvester_constant(&res)?;
    let single = system.n_poles() == 1 || c1 == T::zero();
    let rho_eff = if rho.is_finite() { rho } else { T::one() };
    let d = if single { T::zero() } else { rho_eff * c1 * c_sharp };
    let d_explicit = if single { T::zero() } else { rho_eff * c1 * crate::linalg::efsolr_constant(epsilon, mu, k) };
    let s = opts.radius_fraction.as_f64();
    let tol = opts.tol.as_f64();

    let n_cert = if single {
        0
    } else {
        match certified_order(k, d.as_f64(), s, tol, opts.max_order) {
            Some(n) => n,
            None => {
                // largest radius fraction at which the bound closes with max_order terms
                let (mut lo, mut hi) = (0.0f64, s);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if certified_tail(k, d.as_f64(), mid, opts.max_order) <= tol {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Err(Error::TailBound { d: d.as_f64(), achievable_radius: lo * rho.as_f64() });
            }
        }
    };

    let mut local = LocalSolution {
        pole: j,
        center: system.pole(j),
        q,
        psi: vec![ComplexMatrix::identity(k)],
        phi: Vec::new(),
        rho,
        c1,
        epsilon,
        c_sharp,
        d,
        d_explicit,
        certified_order: n_cert,
        empirical_order: 0,
        max_residual: T::zero(),
        radius: opts.radius_fraction * rho_eff,
        tol: opts.tol,
        resolvent: res,
    };
    if single {
        local.phi = vec![ComplexMatrix::zeros(k)];
        return Ok(local);
    }
    local.extend_to(system, n_cert)?;

    // empirical geometric tail at the evaluation radius
    let sr = T::lit(s) * rho;
    let mut n = n_cert;
    loop {
        let last: Vec<T> = (n.saturating_sub(4)..=n).map(|r| local.psi[r].norm_fro() * sr.powi(r as i32)).collect();
        let worst = last.iter().cloned().fold(T::zero(), T::max);
        if worst <= opts.tol * T::lit(0.1) || n >= opts.max_order {
            break;
        }
        n = (n + 8).min(opts.max_order);
        local.extend_to(system, n)?;
    }
    local.empirical_order = n;
    Ok(local)
}

impl<T: Real> LocalSolution<T> {
    fn extend_to(&mut self, system: &FuchsianSystem<T>, n: usize) -> Result<()> {
        if self.phi.len() < n + 1 {
            self.phi = perturbation_series(system, self.pole, n)?.phi;
        }
        let k = self.q.dim();
        let eps = self.epsilon.min(T::lit(DEFAULT_RESONANCE_MARGIN));
        while self.psi.len() <= n {
            let r = self.psi.len() - 1;
            let mut rhs = ComplexMatrix::zeros(k);
            for m in 0..=r {
                rhs += &self.phi[r - m].matmul(&self.psi[m]);
            }
            let (x, rel) = next_coefficient(&self.resolvent, r, &rhs, eps)?;
            self.max_residual = self.max_residual.max(rel);
            self.psi.push(x);
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.psi.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    /// `‖(r+1)Ψᵣ₊₁ − [Q,Ψᵣ₊₁] − Σ ΦₗΨₘ‖` for every stored order.
    pub fn recursion_residuals(&self) -> Vec<T> {
        let k = self.dim();
        (0..self.order())
            .map(|r| {
                let x = &self.psi[r + 1];
                let mut rhs = ComplexMatrix::zeros(k);
                for m in 0..=r {
                    rhs += &self.phi[r - m].matmul(&self.psi[m]);
                }
                (x.scale_real(T::from_count(r + 1)) - self.q.commutator(x) - rhs).norm_fro()
            })
            .collect()
    }

    /// `√k (r+1)^{d−1} ρ^{−r}`
    pub fn coefficient_bound(&self, r: usize) -> T {
        let k = T::from_count(self.dim()).sqrt();
        k * T::from_count(r + 1).powf(self.d - T::one()) * self.rho.powi(-(r as i32))
    }

    /// `H(tⱼ + ζ)` by Horner's rule.
    pub fn h(&self, zeta: C<T>) -> ComplexMatrix<T> {
        horner(&self.psi, zeta)
    }

    /// `H(x)(x − tⱼ)^{Q}` with the branch given by `base = x − tⱼ`.
    pub fn evaluate(&self, base: &BranchedBase<T>) -> Result<ComplexMatrix<T>> {
        let dist = base.value().norm();
        if dist > self.radius * (T::one() + T::lit(1e-12)) {
            return Err(Error::OutsideCertifiedRadius { distance: dist.as_f64(), radius: self.radius.as_f64() });
        }
        Ok(self.h(base.value()).matmul(&power_base(base, &self.q)?))
    }

    /// Evaluation at `x` with `arg(x − tⱼ)` nearest to `arg_hint`.
    pub fn evaluate_at(&self, x: C<T>, arg_hint: T) -> Result<ComplexMatrix<T>> {
        self.evaluate(&BranchedBase::with_arg(x - self.center, arg_hint)?)
    }

    /// Coefficients of `H⁻¹`: `(r+1)Gᵣ₊₁ − [Q, Gᵣ₊₁] = −Σ_{l+m=r} GₘΦₗ`, `G₀ = I`.
    pub fn inverse_series(&self) -> Result<InverseSeries<T>> {
        let k = self.dim();
        let n = self.order();
        let eps = self.epsilon.min(T::lit(DEFAULT_RESONANCE_MARGIN));
        let mut g = vec![ComplexMatrix::identity(k)];
        let mut max_residual = T::zero();
        for r in 0..n {
            let mut rhs = ComplexMatrix::zeros(k);
            for m in 0..=r {
                rhs -= &g[m].matmul(&self.phi[r - m]);
            }
            let (x, rel) = next_coefficient(&self.resolvent, r, &rhs, eps)?;
            max_residual = max_residual.max(rel);
            g.push(x);
        }
        let product_residuals = (0..=n)
            .map(|r| {
                let mut acc = ComplexMatrix::zeros(k);
                for m in 0..=r {
                    acc += &self.psi[m].matmul(&g[r - m]);
                }
                if r == 0 {
                    acc = acc - ComplexMatrix::identity(k);
                }
                acc.norm_fro()
            })
            .collect();
        Ok(InverseSeries { coefficients: g, max_residual, product_residuals })
    }
}

/// Coefficients of `H⁻¹` together with the Cauchy-product check.
#[derive(Clone, Debug)]
pub struct InverseSeries<T> {
    pub coefficients: Vec<ComplexMatrix<T>>,
    pub max_residual: T,
    /// `‖Σ_{m≤r} Ψₘ Gᵣ₋ₘ − δᵣ₀I‖` for each order.
    pub product_residuals: Vec<T>,
}

impl<T: Real> InverseSeries<T> {
    pub fn eval(&self, zeta: C<T>) -> ComplexMatrix<T> {
        horner(&self.coefficients, zeta)
    }
}

fn horner<T: Real>(coeffs: &[ComplexMatrix<T>], zeta: C<T>) -> ComplexMatrix<T> {
    let k = coeffs[0].dim();
    let mut acc = ComplexMatrix::zeros(k);
    for c in coeffs.iter().rev() {
        acc = acc.scale(zeta) + c;
    }
    acc
}

/// Connection coefficient and local exponent for one approach path.
#[derive(Clone, Debug)]
pub struct ConnectionData<T> {
    pub pole: usize,
    pub c: ComplexMatrix<T>,
    /// `A = C⁻¹QC`
    pub a: ComplexMatrix<T>,
    pub probe: C<T>,
    /// `arg(xⱼ − tⱼ)` used for the local solution.
    pub arg: T,
    pub alpha: PathPlan<T>,
}

/// Default probe distance from the pole, as a fraction of `ρⱼ`.
pub const PROBE_FRACTION: f64 = 0.4;

/// Straight approach path from `x0` to the probe `tⱼ + 0.4ρⱼ·e^{iθ}` facing `x0`.
pub fn approach_path<T: Real>(system: &FuchsianSystem<T>, j: usize, x0: C<T>, clearance: T) -> Result<PathPlan<T>> {
    system.check_index(j)?;
    let t = system.pole(j);
    let r = T::lit(PROBE_FRACTION) * system.rho(j);
    let dir = (x0 - t) / (x0 - t).norm();
    let probe = t + dir * r;
    PathPlan::new(system, vec![x0, probe], clearance.min(r * T::lit(0.999)))
}

/// `C = Yⱼ(xⱼ)⁻¹·Y_α(xⱼ)`, where `Y_α` is the solution normalized at the start of
/// `alpha` and continued along it. The argument of `xⱼ − tⱼ` is taken from the
/// winding ledger of `alpha`, or chosen in `(ϑ₀ − π/2, ϑ₀ + π/2)` when a reference
/// `ϑ₀` is supplied.
pub fn connection_data<T: Real>(
    system: &FuchsianSystem<T>,
    local: &LocalSolution<T>,
    alpha: &PathPlan<T>,
    reference_arg: Option<T>,
    tol: T,
) -> Result<ConnectionData<T>> {
    let j = local.pole;
    let probe = alpha.end();
    let dist = (probe - system.pole(j)).norm();
    if dist > local.radius * (T::one() + T::lit(1e-12)) || dist < alpha.clearance() * (T::one() - T::tol(1e-12)) {
        return Err(Error::OutsideCertifiedRadius { distance: dist.as_f64(), radius: local.radius.as_f64() });
    }
    let theta0 = reference_arg.unwrap_or_else(|| alpha.end_arg(j));
    let base = BranchedBase::with_arg(probe - system.pole(j), theta0)?;
    let yj = local.evaluate(&base)?;
    let ya = continue_solution(system, alpha, &ComplexMatrix::identity(system.dim()), tol)?.y;
    let c = yj.solve(&ya)?;
    let a = c.solve(&local.q.matmul(&c))?;
    Ok(ConnectionData { pole: j, c, a, probe, arg: base.arg(), alpha: alpha.clone() })
}

/// `α`, a counterclockwise circle about `tⱼ` through the probe, then `α⁻¹`.
pub fn generated_loop<T: Real>(system: &FuchsianSystem<T>, j: usize, alpha: &PathPlan<T>) -> Result<LoopPlan<T>> {
    let t = system.pole(j);
    let probe = alpha.end();
    let r = (probe - t).norm();
    let phi0 = (probe - t).arg();
    let nv = crate::path::LOOP_POLYGON_VERTICES;
    let mut v: Vec<C<T>> = alpha.vertices().to_vec();
    for m in 1..=nv {
        v.push(t + Complex::from_polar(r, phi0 + T::TAU() * T::from_count(m) / T::from_count(nv)));
    }
    *v.last_mut().unwrap() = probe;
    v.extend(alpha.vertices().iter().rev().skip(1));
    let clearance = alpha.clearance().min(r * (T::PI() / T::from_count(nv)).cos() * T::lit(0.999));
    let mut lp = LoopPlan::new(PathPlan::new(system, v, clearance)?)?;
    lp.target = Some(j);
    Ok(lp)
}

/// `C⁻¹ e^{2πiQ} C`
pub fn predicted_monodromy<T: Real>(cd: &ConnectionData<T>, q: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    cd.c.solve(&exp_two_pi_i(q)?.matmul(&cd.c))
}

/// `a₀ = 1`, `aᵣ₊₁ = d/(r+2)·Σ_{m≤r} aₘ`: the sequence attaining equality in
/// the recursive estimate.
pub fn extremal_sequence(d: f64, len: usize) -> Vec<f64> {
    let mut a = Vec::with_capacity(len);
    let mut sum = 0.0;
    for r in 0..len {
        let v = if r == 0 { 1.0 } else { d / (r as f64 + 1.0) * sum };
        a.push(v);
        sum += v;
    }
    a
}

#[derive(Clone, Debug)]
pub struct LocalAgreementReport<T> {
    /// Per spiral: `‖Yⱼ(x_b) − continued Yⱼ(x_a)‖ / ‖Yⱼ(x_b)‖`.
    pub residuals: Vec<T>,
    pub max_residual: T,
}

/// Evaluates the local solution at `x_a` on `|x − tⱼ| = ρ/4`, continues it along a
/// spiral out to `x_b` on `|x − tⱼ| = ρ/2` (three quarters of a turn) and compares
/// with direct evaluation at `x_b` on the continued branch.
pub fn verify_local_agreement<T: Real>(
    system: &FuchsianSystem<T>,
    local: &LocalSolution<T>,
    spirals: usize,
    tol: T,
) -> Result<LocalAgreementReport<T>> {
    let j = local.pole;
    let t = system.pole(j);
    let rho = system.rho(j);
    let (r0, r1) = (rho * T::lit(0.25), rho * T::lit(0.5) * (T::one() - T::lit(1e-9)));
    let r1 = r1.min(local.radius);
    let nv = 48usize;
    let mut residuals = Vec::with_capacity(spirals);
    for m in 0..spirals.max(1) {
        let th = T::lit(0.3) + T::TAU() * T::from_count(m) / T::from_count(spirals.max(1));
        let v: Vec<C<T>> = (0..=nv)
            .map(|i| {
                let s = T::from_count(i) / T::from_count(nv);
                t + Complex::from_polar(r0 + (r1 - r0) * s, th + T::lit(1.5) * T::PI() * s)
            })
            .collect();
        let path = PathPlan::new(system, v, r0 * T::lit(0.9))?;
        let ya = local.evaluate(&BranchedBase::with_arg(path.start() - t, th)?)?;
        let end_arg = th + path.end_arg(j) - path.start_arg(j);
        let yb = local.evaluate(&BranchedBase::with_arg(path.end() - t, end_arg)?)?;
        let cont = continue_solution(system, &path, &ya, tol)?.y;
        residuals.push(cont.distance(&yb) / yb.norm_fro().max(T::min_positive_value()));
    }
    let max_residual = residuals.iter().cloned().fold(T::zero(), T::max);
    Ok(LocalAgreementReport { residuals, max_residual })
}

/// Minimum distance of `path` to pole `j`.
pub fn path_distance_to_pole<T: Real>(path: &PathPlan<T>, t: C<T>) -> T {
    path.vertices().windows(2).map(|w| segment_distance(w[0], w[1], t)).fold(T::infinity(), T::min)
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
    fn perturbation_geometric_series() {
        let p = perturbation_series(&scalar_pair(0.3), 0, 6).unwrap();
        for ph in &p.phi {
            assert!((ph[(0, 0)] - c(0.3, 0.0)).norm() < 1e-15);
        }
        for (r, ph) in p.phi.iter().enumerate() {
            assert!(ph.norm_fro() * p.rho.powi(r as i32) <= p.c1 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn no_other_poles_means_zero_perturbation() {
        let s = FuchsianSystem::zero_sum(vec![c(0.0, 0.0)], vec![M::zeros(2)]).unwrap();
        let p = perturbation_series(&s, 0, 4).unwrap();
        assert!(p.phi.iter().all(|m| m.max_abs() == 0.0));
    }

    #[test]
    fn binomial_coefficients() {
        let l = build_local_series(&scalar_pair(0.5), 0, &LocalOptions::new(1e-12)).unwrap();
        assert!((l.psi[1][(0, 0)] - c(0.5, 0.0)).norm() < 1e-14);
        assert!((l.psi[2][(0, 0)] - c(0.375, 0.0)).norm() < 1e-14);
        assert_eq!(l.h(c(0.0, 0.0)), M::identity(1));
        let inv = l.inverse_series().unwrap();
        assert!((inv.coefficients[1][(0, 0)] - c(-0.5, 0.0)).norm() < 1e-14);
        assert!(inv.product_residuals.iter().all(|r| *r < 1e-12));
    }

    #[test]
    fn unperturbed_local_solution_is_pure_power() {
        let q = M::from_diag(&[c(0.2, 0.0), c(-0.3, 0.1)]);
        let s = FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(5.0, 0.0)], vec![q.clone(), M::zeros(2) - &q]).unwrap();
        let s0 = s.with_residues(vec![M::zeros(2), M::zeros(2)]).unwrap();
        let l = build_local_series(&s0, 0, &LocalOptions::new(1e-12)).unwrap();
        assert!(l.psi.iter().skip(1).all(|m| m.max_abs() == 0.0));
    }

    #[test]
    fn resonant_pole_refused() {
        let q = M::from_diag(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let s = FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![q.clone(), -&q]).unwrap();
        assert!(matches!(build_local_series(&s, 0, &LocalOptions::new(1e-10)), Err(Error::Resonance { .. })));
    }

    #[test]
    fn outside_radius_rejected() {
        let l = build_local_series(&scalar_pair(0.5), 0, &LocalOptions::new(1e-10)).unwrap();
        assert!(matches!(l.evaluate_at(c(0.4, 0.0), 0.0), Err(Error::OutsideCertifiedRadius { .. })));
    }

    #[test]
    fn full_turn_multiplies_by_exp() {
        let q1 = M::from_real_rows(&[vec![0.2, 0.3], vec![0.1, -0.25]]).unwrap();
        let s = FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(1.0, 0.5)], vec![q1.clone(), -&q1]).unwrap();
        let l = build_local_series(&s, 0, &LocalOptions::new(1e-12)).unwrap();
        let x = c(0.1, 0.2);
        let a = l.evaluate_at(x, x.arg()).unwrap();
        let b = l.evaluate_at(x, x.arg() + std::f64::consts::TAU).unwrap();
        let e = exp_two_pi_i(&q1).unwrap();
        assert!(b.distance(&a.matmul(&e)) < 1e-10);
    }

    #[test]
    fn scalar_local_agreement() {
        let s = scalar_pair(0.35);
        let l = build_local_series(&s, 1, &LocalOptions::new(1e-12)).unwrap();
        let rep = verify_local_agreement(&s, &l, 3, 1e-12).unwrap();
        assert!(rep.max_residual < 1e-9, "{:?}", rep.residuals);
    }

    #[test]
    fn extremal_sequence_bound() {
        for d in [0.3, 1.0, 2.5, 7.0] {
            for (r, a) in extremal_sequence(d, 200).iter().enumerate() {
                assert!(*a <= ((r + 1) as f64).powf(d - 1.0) * (1.0 + 1e-12));
            }
        }
    }
}
