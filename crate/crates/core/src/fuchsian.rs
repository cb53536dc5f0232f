//! Fuchsian systems `dY/dx = Σ Qⱼ/(x − tⱼ)·Y`.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, integer_separation, ComplexMatrix};
use crate::scalar::{Real, C};

/// Pole loci and residue matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct FuchsianSystem<T> {
    k: usize,
    poles: Vec<C<T>>,
    residues: Vec<ComplexMatrix<T>>,
    zero_sum_at_infinity: bool,
}

/// Resonance classification of one residue.
#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceReport<T> {
    pub pole: usize,
    pub eigenvalues: Vec<C<T>>,
    /// `min |λₚ − λ_q − m|` over nonzero integers `m`.
    pub margin: T,
    pub non_resonant: bool,
}

/// Relative floor on the smallest pole gap.
pub const POLE_GAP_FLOOR: f64 = 1e-9;

/// Default separation of eigenvalue differences from nonzero integers.
pub const DEFAULT_RESONANCE_MARGIN: f64 = 1e-6;

impl<T: Real> FuchsianSystem<T> {
    /// Validates the data. With `zero_sum_at_infinity` the residues must add up
    /// to zero (`∞` regular).
    pub fn new(poles: Vec<C<T>>, residues: Vec<ComplexMatrix<T>>, zero_sum_at_infinity: bool) -> Result<Self> {
        if poles.len() != residues.len() {
            return Err(Error::DimensionMismatch { expected: poles.len(), found: residues.len() });
        }
        if poles.is_empty() {
            return Err(Error::InvalidSystem("at least one pole is required".into()));
        }
        let k = residues[0].dim();
        if k == 0 || k > 8 {
            return Err(Error::InvalidSystem(format!("matrix dimension {k} outside 1..=8")));
        }
        for q in &residues {
            if q.dim() != k {
                return Err(Error::DimensionMismatch { expected: k, found: q.dim() });
            }
            if !q.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        if poles.iter().any(|t| !(t.re.is_finite() && t.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        let sys = Self { k, poles, residues, zero_sum_at_infinity };
        if sys.poles.len() > 1 {
            let gap = sys.min_gap();
            let diam = sys.diameter();
            if !(gap > T::lit(POLE_GAP_FLOOR) * diam) {
                return Err(Error::InvalidSystem(format!(
                    "poles not distinct: min gap {:e} vs diameter {:e}",
                    gap.as_f64(),
                    diam.as_f64()
                )));
            }
        }
        if zero_sum_at_infinity {
            let residual = sys.residue_sum().norm_fro();
            let scale = sys.max_residue_norm();
            if residual > T::tol(1e-12) * scale {
                return Err(Error::ZeroSumViolated { residual: residual.as_f64() });
            }
        }
        Ok(sys)
    }

    /// Shorthand for a system regular at infinity.
    pub fn zero_sum(poles: Vec<C<T>>, residues: Vec<ComplexMatrix<T>>) -> Result<Self> {
        Self::new(poles, residues, true)
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn n_poles(&self) -> usize {
        self.poles.len()
    }

    pub fn poles(&self) -> &[C<T>] {
        &self.poles
    }

    pub fn residues(&self) -> &[ComplexMatrix<T>] {
        &self.residues
    }

    pub fn pole(&self, j: usize) -> C<T> {
        self.poles[j]
    }

    pub fn residue(&self, j: usize) -> &ComplexMatrix<T> {
        &self.residues[j]
    }

    pub fn zero_sum_at_infinity(&self) -> bool {
        self.zero_sum_at_infinity
    }

    pub(crate) fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.n_poles() {
            return Err(Error::Precondition(format!("pole index {j} out of range 0..{}", self.n_poles())));
        }
        Ok(())
    }

    /// Same residues at new pole loci.
    pub fn with_poles(&self, poles: Vec<C<T>>) -> Result<Self> {
        Self::new(poles, self.residues.clone(), self.zero_sum_at_infinity)
    }

    /// Same poles with new residues.
    pub fn with_residues(&self, residues: Vec<ComplexMatrix<T>>) -> Result<Self> {
        Self::new(self.poles.clone(), residues, self.zero_sum_at_infinity)
    }

    pub fn residue_sum(&self) -> ComplexMatrix<T> {
        self.residues.iter().fold(ComplexMatrix::zeros(self.k), |acc, q| acc + q)
    }

    pub fn max_residue_norm(&self) -> T {
        self.residues.iter().map(|q| q.norm_fro()).fold(T::zero(), T::max)
    }

    pub fn min_gap(&self) -> T {
        let mut gap = T::infinity();
        for i in 0..self.poles.len() {
            for j in i + 1..self.poles.len() {
                gap = gap.min((self.poles[i] - self.poles[j]).norm());
            }
        }
        gap
    }

    pub fn diameter(&self) -> T {
        let mut d = T::zero();
        for a in &self.poles {
            for b in &self.poles {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Distance from `tⱼ` to the nearest other pole (infinite for a single pole).
    pub fn nearest_gap(&self, j: usize) -> T {
        self.poles
            .iter()
            .enumerate()
            .filter(|(p, _)| *p != j)
            .map(|(_, t)| (t - self.poles[j]).norm())
            .fold(T::infinity(), T::min)
    }

    /// `ρⱼ = ½ min_{p≠j} |tⱼ − tₚ|`.
    pub fn rho(&self, j: usize) -> T {
        self.nearest_gap(j) * T::lit(0.5)
    }

    /// Characteristic length of the configuration (never zero).
    pub fn length_scale(&self) -> T {
        let m = self.poles.iter().map(|t| t.norm()).fold(T::zero(), T::max);
        m.max(self.diameter()).max(T::one())
    }

    /// Index and distance of the nearest pole.
    pub fn nearest_pole(&self, x: C<T>) -> (usize, T) {
        let mut best = (0, T::infinity());
        for (j, t) in self.poles.iter().enumerate() {
            let d = (x - t).norm();
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }

    fn check_regular(&self, x: C<T>) -> Result<()> {
        let (j, d) = self.nearest_pole(x);
        if d <= T::lit(1e-14) * self.length_scale() {
            return Err(Error::AtPole { pole: j, distance: d.as_f64() });
        }
        Ok(())
    }

    /// `Σ Qⱼ/(x − tⱼ)`.
    pub fn coefficient_at(&self, x: C<T>) -> Result<ComplexMatrix<T>> {
        self.check_regular(x)?;
        Ok(self.coefficient_unchecked(x))
    }

    pub(crate) fn coefficient_unchecked(&self, x: C<T>) -> ComplexMatrix<T> {
        let mut a = ComplexMatrix::zeros(self.k);
        for (t, q) in self.poles.iter().zip(&self.residues) {
            let w = C::<T>::one() / (x - t);
            for (dst, src) in a.as_mut_slice().iter_mut().zip(q.as_slice()) {
                *dst += src * w;
            }
        }
        a
    }

    /// `tr Σ Qⱼ/(x − tⱼ)`.
    pub fn trace_coefficient_at(&self, x: C<T>) -> C<T> {
        self.poles
            .iter()
            .zip(&self.residues)
            .fold(C::zero(), |acc, (t, q)| acc + q.trace() / (x - t))
    }

    /// Coefficients of `x⁻¹, x⁻², …, x⁻ᵐ` at infinity: `Σ tⱼ^{r} Qⱼ` for `x^{−r−1}`.
    pub fn laurent_at_infinity(&self, orders: usize) -> Result<Vec<ComplexMatrix<T>>> {
        if !self.zero_sum_at_infinity {
            return Err(Error::ZeroSumViolated { residual: self.residue_sum().norm_fro().as_f64() });
        }
        let mut out = Vec::with_capacity(orders);
        let mut powers: Vec<C<T>> = vec![C::one(); self.n_poles()];
        for _ in 0..orders {
            let mut c = ComplexMatrix::zeros(self.k);
            for ((p, q), t) in powers.iter_mut().zip(&self.residues).zip(&self.poles) {
                c = c.axpy(*p, q);
                *p *= t;
            }
            out.push(c);
        }
        Ok(out)
    }

    /// Resonance report for pole `j`.
    pub fn resonance_report(&self, j: usize) -> Result<ResonanceReport<T>> {
        self.check_index(j)?;
        let values = eigenvalues(&self.residues[j])?.into_vec();
        let margin = integer_separation(&values);
        let scale = values.iter().map(|z| z.norm()).fold(T::zero(), T::max);
        let non_resonant = margin > T::tol(1e-12) * (T::one() + scale);
        Ok(ResonanceReport { pole: j, eigenvalues: values, margin, non_resonant })
    }

    pub fn cast<U: Real>(&self) -> FuchsianSystem<U> {
        FuchsianSystem {
            k: self.k,
            poles: self.poles.iter().map(|z| C::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64()))).collect(),
            residues: self.residues.iter().map(|q| q.cast()).collect(),
            zero_sum_at_infinity: self.zero_sum_at_infinity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    type M = ComplexMatrix<f64>;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn scalar_pair(q: f64) -> FuchsianSystem<f64> {
        FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![M::scalar(1, c(q, 0.0)), M::scalar(1, c(-q, 0.0))])
            .unwrap()
    }

    #[test]
    fn single_zero_residue_is_trivial() {
        let s = FuchsianSystem::zero_sum(vec![c(0.5, 0.0)], vec![M::zeros(2)]).unwrap();
        assert_eq!(s.coefficient_at(c(3.0, 1.0)).unwrap(), M::zeros(2));
    }

    #[test]
    fn single_nonzero_residue_rejected_under_zero_sum() {
        let r = FuchsianSystem::zero_sum(vec![c(0.5, 0.0)], vec![M::identity(2)]);
        assert!(matches!(r, Err(Error::ZeroSumViolated { .. })));
    }

    #[test]
    fn scalar_coefficient() {
        let s = scalar_pair(0.7);
        let a = s.coefficient_at(c(2.0, 0.0)).unwrap();
        assert!((a[(0, 0)] - c(-0.35, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn residue_by_limit() {
        let q1 = M::from_real_rows(&[vec![0.2, 1.0], vec![0.0, -0.3]]).unwrap();
        let s = FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(1.0, 1.0)], vec![q1.clone(), -&q1]).unwrap();
        let x = c(1e-6, 0.0);
        let lim = s.coefficient_at(x).unwrap().scale(x);
        assert!(lim.distance(&q1) < 1e-5);
    }

    #[test]
    fn coefficient_at_pole_rejected() {
        let s = scalar_pair(0.5);
        assert!(matches!(s.coefficient_at(c(1.0, 0.0)), Err(Error::AtPole { pole: 1, .. })));
    }

    #[test]
    fn laurent_coefficients() {
        let s = scalar_pair(0.8);
        let l = s.laurent_at_infinity(3).unwrap();
        assert!(l[0].max_abs() < 1e-15);
        assert!((l[1][(0, 0)] - c(-0.8, 0.0)).norm() < 1e-15);
        let z = FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(2.0, 0.0)], vec![M::zeros(2), M::zeros(2)]).unwrap();
        assert!(z.laurent_at_infinity(4).unwrap().iter().all(|m| m.max_abs() == 0.0));
    }

    #[test]
    fn laurent_requires_zero_sum() {
        let s = FuchsianSystem::new(vec![c(0.0, 0.0)], vec![M::identity(1)], false).unwrap();
        assert!(matches!(s.laurent_at_infinity(2), Err(Error::ZeroSumViolated { .. })));
    }

    #[test]
    fn resonance_examples() {
        let mk = |a: f64, b: f64| {
            let q = M::from_diag(&[c(a, 0.0), c(b, 0.0)]);
            FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![q.clone(), -&q]).unwrap()
        };
        let r = mk(0.3, -0.2).resonance_report(0).unwrap();
        assert!(r.non_resonant && (r.margin - 0.5).abs() < 1e-12);
        let r = mk(1.0, 0.0).resonance_report(0).unwrap();
        assert!(!r.non_resonant && r.margin < 1e-12);
        let r = mk(0.5, 0.5).resonance_report(0).unwrap();
        assert!(r.non_resonant && (r.margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_poles_rejected() {
        let r = FuchsianSystem::zero_sum(vec![c(1.0, 0.0), c(1.0, 0.0)], vec![M::zeros(1), M::zeros(1)]);
        assert!(matches!(r, Err(Error::InvalidSystem(_))));
    }

    #[test]
    fn residue_theorem_by_quadrature() {
        // (1/2πi)∮ A dx over a circle enclosing all poles equals ΣQⱼ = 0
        let q = M::from_real_rows(&[vec![0.1, 0.4], vec![-0.2, 0.3]]).unwrap();
        let s = FuchsianSystem::zero_sum(vec![c(-0.5, 0.1), c(0.7, -0.2)], vec![q.clone(), -&q]).unwrap();
        let nodes = 256;
        let mut acc = M::zeros(2);
        for m in 0..nodes {
            let x = Complex::from_polar(3.0, std::f64::consts::TAU * m as f64 / nodes as f64);
            acc = acc.axpy(x / nodes as f64, &s.coefficient_at(x).unwrap());
        }
        assert!(acc.max_abs() < 1e-13);
    }
}
