//! Rational fundamental solutions `Y(x) = L·F₁(x)⋯Fₙ(x)` built from projector factors
//! `Fⱼ = (x − tⱼ)^{Zⱼ}`, `Zⱼ² = ±Zⱼ`, and the Fuchsian systems they solve.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fuchsian::FuchsianSystem;
use crate::linalg::{eigenvalues, numerical_rank, ComplexMatrix};
use crate::path::{choose_basepoint, default_loop_clearance, generator_loops, generator_monodromies};
use crate::scalar::{Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorSign {
    /// `Z² = Z`: `F = I − Z + (x − t)Z`
    Plus,
    /// `Z² = −Z`: `F = I + Z − Z/(x − t)`
    Minus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalFactor<T> {
    pub t: C<T>,
    pub z: ComplexMatrix<T>,
    pub sign: FactorSign,
}

impl<T: Real> PrincipalFactor<T> {
    /// Classifies `Z` by `‖Z² ∓ Z‖ ≤ 1e-12·‖Z‖²`.
    pub fn new(t: C<T>, z: ComplexMatrix<T>) -> Result<Self> {
        if !z.is_finite() || !(t.re.is_finite() && t.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let z2 = z.matmul(&z);
        let n = z.norm_fro();
        let tol = T::tol(1e-12) * (n * n).max(n);
        if z2.distance(&z) <= tol {
            Ok(Self { t, z, sign: FactorSign::Plus })
        } else if (&z2 + &z).norm_fro() <= tol {
            Ok(Self { t, z, sign: FactorSign::Minus })
        } else {
            Err(Error::InvalidFactor(format!(
                "Z is neither a projector nor a negated projector (‖Z²−Z‖ = {:e}, ‖Z²+Z‖ = {:e})",
                z2.distance(&z).as_f64(),
                (&z2 + &z).norm_fro().as_f64()
            )))
        }
    }

    pub fn with_sign(t: C<T>, z: ComplexMatrix<T>, sign: FactorSign) -> Result<Self> {
        let f = Self::new(t, z)?;
        if f.sign != sign && f.z.max_abs() != T::zero() {
            return Err(Error::InvalidFactor(format!("Z does not have the declared sign {sign:?}")));
        }
        Ok(Self { sign, ..f })
    }

    /// The same `Z` at another pole.
    pub fn moved(&self, t: C<T>) -> Self {
        Self { t, ..self.clone() }
    }

    fn dim(&self) -> usize {
        self.z.dim()
    }

    /// `F(x)`
    pub fn eval(&self, x: C<T>) -> Result<ComplexMatrix<T>> {
        principal_factor_eval(self, x)
    }

    /// `F(x)⁻¹`
    pub fn eval_inverse(&self, x: C<T>) -> Result<ComplexMatrix<T>> {
        let i = ComplexMatrix::identity(self.dim());
        let zeta = x - self.t;
        match self.sign {
            FactorSign::Plus => {
                if zeta == C::zero() {
                    return Err(Error::AtPole { pole: 0, distance: 0.0 });
                }
                Ok((i - &self.z).axpy(C::<T>::one() / zeta, &self.z))
            }
            FactorSign::Minus => Ok((i + &self.z).axpy(-zeta, &self.z)),
        }
    }

    /// `F′(x)`
    pub fn derivative(&self, x: C<T>) -> Result<ComplexMatrix<T>> {
        match self.sign {
            FactorSign::Plus => Ok(self.z.clone()),
            FactorSign::Minus => {
                let zeta = x - self.t;
                if zeta == C::zero() {
                    return Err(Error::AtPole { pole: 0, distance: 0.0 });
                }
                Ok(self.z.scale(C::<T>::one() / (zeta * zeta)))
            }
        }
    }

    /// Laurent expansion of `F` (or `F⁻¹`) about `s`.
    fn laurent(&self, s: C<T>, inverse: bool, hi: i32) -> Laurent<T> {
        let k = self.dim();
        let i = ComplexMatrix::identity(k);
        let z = &self.z;
        let d = s - self.t;
        let at_pole = d == C::zero();
        // `a + b·ζ` or `a + b/(d + ζ)`
        let (a, b, polar) = match (self.sign, inverse) {
            (FactorSign::Plus, false) => (&i - z + z.scale(d), z.clone(), false),
            (FactorSign::Plus, true) => (&i - z, z.clone(), true),
            (FactorSign::Minus, false) => (&i + z, -z, true),
            (FactorSign::Minus, true) => (&i + z - z.scale(d), -z, false),
        };
        if !polar {
            let mut out = Laurent::zero(k, 0, hi);
            out.add_at(0, &a);
            out.add_at(1, &b);
            return out;
        }
        if at_pole {
            let mut out = Laurent::zero(k, -1, hi);
            out.add_at(-1, &b);
            out.add_at(0, &a);
            return out;
        }
        // 1/(d + ζ) = Σ (−1)^m ζ^m / d^{m+1}
        let mut out = Laurent::zero(k, 0, hi);
        out.add_at(0, &a);
        let inv = C::<T>::one() / d;
        let mut w = inv;
        for m in 0..hi.max(0) {
            out.add_at(m, &b.scale(w));
            w = -w * inv;
        }
        out
    }
}

/// A plus factor `P = u pᵀ/(pᵀu)` at `t1` and a minus factor `−R`, `R = r pᵀ/(pᵀr)`, at `t2`.
/// Sharing the row vector `p` makes `Y = Y∞ + K/(x − t2)` bounded at `∞`, so the
/// pair solves a Fuchsian system with `Σ Qⱼ = 0`.
pub fn fuchsian_pair<T: Real>(
    t1: C<T>,
    t2: C<T>,
    u: &[C<T>],
    r: &[C<T>],
    p: &[C<T>],
) -> Result<[PrincipalFactor<T>; 2]> {
    let k = p.len();
    if u.len() != k || r.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: u.len().min(r.len()) });
    }
    let dot = |a: &[C<T>]| a.iter().zip(p).map(|(x, y)| x * y).sum::<C<T>>();
    let (pu, pr) = (dot(u), dot(r));
    let floor = T::tol(1e-8);
    if pu.norm() <= floor || pr.norm() <= floor {
        return Err(Error::InvalidFactor("pᵀu and pᵀr must be nonzero".into()));
    }
    let pm = ComplexMatrix::from_fn(k, |i, j| u[i] * p[j] / pu);
    let rm = ComplexMatrix::from_fn(k, |i, j| -(r[i] * p[j] / pr));
    Ok([PrincipalFactor::with_sign(t1, pm, FactorSign::Plus)?, PrincipalFactor::with_sign(t2, rm, FactorSign::Minus)?])
}

/// `I − Z + (x − t)Z` for `Z² = Z`, `I + Z − Z/(x − t)` for `Z² = −Z`.
pub fn principal_factor_eval<T: Real>(factor: &PrincipalFactor<T>, x: C<T>) -> Result<ComplexMatrix<T>> {
    let i = ComplexMatrix::identity(factor.dim());
    let zeta = x - factor.t;
    match factor.sign {
        FactorSign::Plus => Ok((i - &factor.z).axpy(zeta, &factor.z)),
        FactorSign::Minus => {
            if zeta == C::zero() {
                return Err(Error::AtPole { pole: 0, distance: 0.0 });
            }
            Ok((i + &factor.z).axpy(-(C::<T>::one() / zeta), &factor.z))
        }
    }
}

/// Truncated matrix Laurent series `Σ_{lo ≤ m < hi} c_m ζ^m`.
#[derive(Clone, Debug)]
struct Laurent<T> {
    lo: i32,
    hi: i32,
    c: Vec<ComplexMatrix<T>>,
}

impl<T: Real> Laurent<T> {
    fn zero(k: usize, lo: i32, hi: i32) -> Self {
        Self { lo, hi, c: vec![ComplexMatrix::zeros(k); (hi - lo).max(0) as usize] }
    }

    fn constant(m: ComplexMatrix<T>, hi: i32) -> Self {
        let mut out = Self::zero(m.dim(), 0, hi);
        out.add_at(0, &m);
        out
    }

    fn add_at(&mut self, m: i32, v: &ComplexMatrix<T>) {
        if m >= self.lo && m < self.hi {
            let idx = (m - self.lo) as usize;
            self.c[idx] += v;
        }
    }

    fn coeff(&self, m: i32) -> ComplexMatrix<T> {
        if m >= self.lo && m < self.hi {
            self.c[(m - self.lo) as usize].clone()
        } else {
            ComplexMatrix::zeros(self.c.first().map_or(0, |c| c.dim()))
        }
    }

    fn mul(&self, other: &Self) -> Self {
        let k = self.c.first().map_or(0, |c| c.dim());
        let lo = self.lo + other.lo;
        // valid up to the smaller of the two truncation orders shifted by the other's lowest order
        let hi = (self.hi + other.lo).min(other.hi + self.lo);
        let mut out = Self::zero(k, lo, hi);
        for (a, ca) in self.c.iter().enumerate() {
            for (b, cb) in other.c.iter().enumerate() {
                let m = self.lo + a as i32 + other.lo + b as i32;
                if m < hi {
                    out.add_at(m, &ca.matmul(cb));
                }
            }
        }
        out
    }

    fn derivative(&self) -> Self {
        let k = self.c.first().map_or(0, |c| c.dim());
        let mut out = Self::zero(k, self.lo - 1, self.hi - 1);
        for (a, ca) in self.c.iter().enumerate() {
            let m = self.lo + a as i32;
            if m != 0 {
                out.add_at(m - 1, &ca.scale_real(T::lit(m as f64)));
            }
        }
        out
    }
}

/// Product of factors with a constant left factor, and the Fuchsian system it solves.
#[derive(Clone, Debug)]
pub struct RationalFamily<T> {
    pub factors: Vec<PrincipalFactor<T>>,
    pub left: ComplexMatrix<T>,
    /// `Qⱼ = Res_{tⱼ} Y′Y⁻¹`
    pub residues: Vec<ComplexMatrix<T>>,
    pub residue_sum: ComplexMatrix<T>,
    pub zero_sum: bool,
    /// `max ‖Y′Y⁻¹ − Σ Qⱼ/(x − tⱼ)‖` over sample points, relative.
    pub log_derivative_residual: T,
    /// Numerical ranks of the residues (tolerance `1e-9·‖Qⱼ‖`).
    pub ranks: Vec<usize>,
    /// Residue spectrum within `1e-9` of `{0, 1}` or `{0, −1}`.
    pub spectra_in_unit_set: Vec<bool>,
    /// All residues rank one with unit-set spectra.
    pub generic: bool,
    pub system: Option<FuchsianSystem<T>>,
}

const TRUNCATION: i32 = 4;
const GENERIC_TOL: f64 = 1e-9;

fn unit_spectrum<T: Real>(q: &ComplexMatrix<T>) -> Result<bool> {
    let ev = eigenvalues(q)?;
    let near = |v: &C<T>, target: T| (v - C::new(target, T::zero())).norm() <= T::lit(GENERIC_TOL).max(T::tol(1e-9));
    let plus = ev.values().iter().all(|v| near(v, T::zero()) || near(v, T::one()));
    let minus = ev.values().iter().all(|v| near(v, T::zero()) || near(v, -T::one()));
    Ok(plus || minus)
}

impl<T: Real> RationalFamily<T> {
    pub fn dim(&self) -> usize {
        self.left.dim()
    }

    pub fn poles(&self) -> Vec<C<T>> {
        self.factors.iter().map(|f| f.t).collect()
    }

    /// `Y(x) = L·F₁(x)⋯Fₙ(x)`
    pub fn eval(&self, x: C<T>) -> Result<ComplexMatrix<T>> {
        self.factors.iter().try_fold(self.left.clone(), |acc, f| Ok(acc.matmul(&f.eval(x)?)))
    }

    pub fn eval_inverse(&self, x: C<T>) -> Result<ComplexMatrix<T>> {
        let linv = self.left.inverse()?;
        self.factors.iter().rev().try_fold(ComplexMatrix::identity(self.dim()), |acc, f| Ok(acc.matmul(&f.eval_inverse(x)?))).map(|m| m.matmul(&linv))
    }

    /// `Y′(x)Y(x)⁻¹` by the product rule.
    pub fn log_derivative(&self, x: C<T>) -> Result<ComplexMatrix<T>> {
        let k = self.dim();
        let mut dy = ComplexMatrix::zeros(k);
        for i in 0..self.factors.len() {
            let mut acc = self.left.clone();
            for (p, f) in self.factors.iter().enumerate() {
                acc = acc.matmul(&if p == i { f.derivative(x)? } else { f.eval(x)? });
            }
            dy += &acc;
        }
        Ok(dy.matmul(&self.eval_inverse(x)?))
    }

    fn series(&self, s: C<T>, inverse: bool) -> Laurent<T> {
        let k = self.dim();
        let hi = TRUNCATION + 2;
        if inverse {
            let mut acc = Laurent::constant(ComplexMatrix::identity(k), hi);
            for f in self.factors.iter().rev() {
                acc = acc.mul(&f.laurent(s, true, hi));
            }
            acc.mul(&Laurent::constant(self.left.inverse().unwrap_or_else(|_| ComplexMatrix::identity(k)), hi))
        } else {
            let mut acc = Laurent::constant(self.left.clone(), hi);
            for f in &self.factors {
                acc = acc.mul(&f.laurent(s, false, hi));
            }
            acc
        }
    }
}

/// Assembles `Y = L·ΠFⱼ` and extracts the residues of `Y′Y⁻¹` by Laurent algebra.
pub fn assemble_family<T: Real>(factors: Vec<PrincipalFactor<T>>, left: Option<ComplexMatrix<T>>) -> Result<RationalFamily<T>> {
    let k = match (factors.first(), &left) {
        (Some(f), _) => f.dim(),
        (None, Some(l)) => l.dim(),
        (None, None) => return Err(Error::InvalidFactor("an empty family needs a left factor".into())),
    };
    let left = left.unwrap_or_else(|| ComplexMatrix::identity(k));
    if left.dim() != k {
        return Err(Error::DimensionMismatch { expected: k, found: left.dim() });
    }
    if let Some(f) = factors.iter().find(|f| f.dim() != k) {
        return Err(Error::DimensionMismatch { expected: k, found: f.dim() });
    }
    let det = left.det();
    if !(det.norm() > T::tol(1e-12) * left.norm_fro().powi(k as i32).max(T::min_positive_value())) {
        return Err(Error::Singular);
    }
    let scale_t = factors.iter().map(|f| f.t.norm()).fold(T::one(), T::max);
    for i in 0..factors.len() {
        for j in i + 1..factors.len() {
            if (factors[i].t - factors[j].t).norm() <= T::tol(1e-12) * scale_t {
                return Err(Error::InvalidFactor(format!("factors {i} and {j} share the pole locus")));
            }
        }
    }
    let mut fam = RationalFamily {
        factors,
        left,
        residues: Vec::new(),
        residue_sum: ComplexMatrix::zeros(k),
        zero_sum: true,
        log_derivative_residual: T::zero(),
        ranks: Vec::new(),
        spectra_in_unit_set: Vec::new(),
        generic: true,
        system: None,
    };
    let mut residues = Vec::with_capacity(fam.factors.len());
    for (j, f) in fam.factors.iter().enumerate() {
        let y = fam.series(f.t, false);
        let w = fam.series(f.t, true);
        let ld = y.derivative().mul(&w);
        let q = ld.coeff(-1);
        let sc = q.norm_fro().max(T::one());
        for order in [3, 2] {
            let m = ld.coeff(-order).norm_fro();
            if m > T::tol(1e-9) * sc {
                return Err(Error::NonFuchsian { pole: j, order: order as usize, magnitude: m.as_f64() });
            }
        }
        residues.push(q);
    }
    fam.residue_sum = residues.iter().fold(ComplexMatrix::zeros(k), |a, q| a + q);
    let qscale = residues.iter().map(|q| q.norm_fro()).fold(T::one(), T::max);
    fam.zero_sum = fam.residue_sum.norm_fro() <= T::tol(1e-9) * qscale;
    for q in &residues {
        fam.ranks.push(if q.norm_fro() == T::zero() { 0 } else { numerical_rank(q, T::lit(GENERIC_TOL))? });
        fam.spectra_in_unit_set.push(unit_spectrum(q)?);
    }
    fam.generic = fam.ranks.iter().all(|r| *r == 1) && fam.spectra_in_unit_set.iter().all(|b| *b);

    if !fam.factors.is_empty() {
        // certify the partial-fraction form at sample points around the configuration
        let poles = fam.poles();
        let centre = poles.iter().fold(C::<T>::zero(), |a, t| a + t) / T::from_count(poles.len());
        let spread = poles.iter().map(|t| (t - centre).norm()).fold(T::one(), T::max);
        let mut worst = T::zero();
        for m in 0..12 {
            let r = spread * T::lit(if m % 2 == 0 { 0.77 } else { 2.9 });
            let x = centre + Complex::from_polar(r, T::lit(0.41 + 0.53 * m as f64));
            if poles.iter().any(|t| (x - t).norm() < spread * T::lit(1e-3)) {
                continue;
            }
            let lhs = fam.log_derivative(x)?;
            let rhs = poles.iter().zip(&residues).fold(ComplexMatrix::zeros(k), |a, (t, q)| a.axpy(C::<T>::one() / (x - t), q));
            worst = worst.max(lhs.distance(&rhs) / lhs.norm_fro().max(rhs.norm_fro()).max(T::min_positive_value()));
        }
        fam.log_derivative_residual = worst;
        if worst > T::tol(1e-8) {
            // Y′Y⁻¹ keeps a polynomial part: a pole of order ≥ 2 at ∞
            return Err(Error::NonFuchsian { pole: poles.len(), order: 2, magnitude: worst.as_f64() });
        }
        fam.system = Some(FuchsianSystem::new(poles, residues.clone(), fam.zero_sum)?);
    }
    fam.residues = residues;
    Ok(fam)
}

/// Local factorization `Y(x) = H(x)·(x − tⱼ)^{Ẑ}` at one pole.
#[derive(Clone, Debug)]
pub struct PoleFactorization<T> {
    pub pole: usize,
    /// `Ẑ = A(tⱼ)⁻¹ Zⱼ A(tⱼ)` with `A = Fⱼ₊₁⋯Fₙ`.
    pub z: ComplexMatrix<T>,
    pub sign: FactorSign,
    /// Taylor coefficients of `H` at `tⱼ`.
    pub h: Vec<ComplexMatrix<T>>,
    pub det_h: C<T>,
    /// Largest negative-order Laurent coefficient of `Y·(x − tⱼ)^{−Ẑ}` from circle sampling.
    pub negative_coefficients: T,
    /// `‖H(tⱼ)ẐH(tⱼ)⁻¹ − Qⱼ‖`
    pub residue_mismatch: T,
}

impl<T: Real> PoleFactorization<T> {
    pub fn principal(&self, t: C<T>) -> PrincipalFactor<T> {
        PrincipalFactor { t, z: self.z.clone(), sign: self.sign }
    }

    /// `H(tⱼ + ζ)` from the Taylor coefficients.
    pub fn h_at(&self, zeta: C<T>) -> ComplexMatrix<T> {
        let k = self.z.dim();
        self.h.iter().rev().fold(ComplexMatrix::zeros(k), |acc, c| acc.scale(zeta) + c)
    }
}

/// Factors `Y` at pole `j` into a holomorphic invertible `H` and a principal factor.
pub fn factor_at_pole<T: Real>(family: &RationalFamily<T>, j: usize) -> Result<PoleFactorization<T>> {
    let n = family.factors.len();
    if j >= n {
        return Err(Error::Precondition(format!("pole index {j} out of range 0..{n}")));
    }
    let k = family.dim();
    let f = &family.factors[j];
    let tj = f.t;
    let mut a = ComplexMatrix::identity(k);
    for g in &family.factors[j + 1..] {
        a = a.matmul(&g.eval(tj)?);
    }
    let zh = a.solve(&f.z.matmul(&a)).map_err(|_| Error::FactorizationFailed { pole: j, reason: "trailing factors singular at the pole".into() })?;
    let principal = PrincipalFactor { t: tj, z: zh.clone(), sign: f.sign };

    // H = Y·P⁻¹ as a Laurent series
    let hi = TRUNCATION + 2;
    let h_series = family.series(tj, false).mul(&principal.laurent(tj, true, hi));
    let sc = h_series.coeff(0).norm_fro().max(T::one());
    for m in 1..=2 {
        let c = h_series.coeff(-m).norm_fro();
        if c > T::tol(1e-9) * sc {
            return Err(Error::FactorizationFailed { pole: j, reason: format!("H has a pole of order {m} (coefficient {:e})", c.as_f64()) });
        }
    }
    let h: Vec<ComplexMatrix<T>> = (0..TRUNCATION).map(|m| h_series.coeff(m)).collect();
    let det_h = h[0].det();
    if !(det_h.norm() > T::tol(1e-12) * sc.powi(k as i32)) {
        return Err(Error::FactorizationFailed { pole: j, reason: "H(tⱼ) is singular".into() });
    }

    // circle sampling oracle
    let others = family.factors.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, g)| (g.t - tj).norm()).fold(T::infinity(), T::min);
    let r = if others.is_finite() { others * T::lit(0.25) } else { T::one() };
    let nodes = 64usize;
    let samples: Vec<(C<T>, ComplexMatrix<T>)> = (0..nodes)
        .map(|m| {
            let zeta = Complex::from_polar(r, T::TAU() * T::from_count(m) / T::from_count(nodes));
            Ok((zeta, family.eval(tj + zeta)?.matmul(&principal.eval_inverse(tj + zeta)?)))
        })
        .collect::<Result<_>>()?;
    let mut neg = T::zero();
    for order in 1..=3i32 {
        let mut acc = ComplexMatrix::zeros(k);
        for (zeta, hv) in &samples {
            acc = acc.axpy(zeta.powi(order), hv);
        }
        neg = neg.max(acc.norm_fro() / T::from_count(nodes) / r.powi(order));
    }
    let q_rec = h[0].matmul(&zh).matmul(&h[0].inverse()?);
    let residue_mismatch = q_rec.distance(&family.residues[j]);
    Ok(PoleFactorization { pole: j, z: zh, sign: f.sign, h, det_h, negative_coefficients: neg, residue_mismatch })
}

#[derive(Clone, Debug)]
pub struct TrivialMonodromyReport<T> {
    /// `‖M_{γⱼ} − I‖` per pole.
    pub deviations: Vec<T>,
    pub max_deviation: T,
    pub passed: bool,
}

/// Continuation around every generator loop of the derived system.
pub fn verify_trivial_monodromy<T: Real>(family: &RationalFamily<T>, tol: T) -> Result<TrivialMonodromyReport<T>> {
    let Some(system) = &family.system else {
        return Ok(TrivialMonodromyReport { deviations: Vec::new(), max_deviation: T::zero(), passed: true });
    };
    let x0 = choose_basepoint(system);
    let loops = generator_loops(system, x0, default_loop_clearance(system))?;
    let itol = (tol * T::lit(1e-2)).max(T::tol(1e-13));
    let id = ComplexMatrix::identity(system.dim());
    let deviations: Vec<T> = generator_monodromies(system, &loops, itol)?.iter().map(|m| m.m.distance(&id)).collect();
    let max_deviation = deviations.iter().cloned().fold(T::zero(), T::max);
    Ok(TrivialMonodromyReport { deviations, max_deviation, passed: max_deviation <= tol })
}
