//! Dormand–Prince 5(4) for complex-valued systems over a real parameter,
//! with PI step-size control.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// Step-control settings.
#[derive(Clone, Copy, Debug)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<T>,
    /// Smallest admissible step, relative to the interval length.
    pub h_min_rel: T,
    pub max_steps: usize,
}

impl<T: Real> OdeOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        let tol = tol.max(T::epsilon() * T::lit(16.0));
        Self { rtol: tol, atol: tol, h_init: None, h_min_rel: T::epsilon() * T::lit(16.0), max_steps: 200_000 }
    }
}

/// Statistics of a finished integration.
#[derive(Clone, Copy, Debug, Default)]
pub struct OdeStats<T> {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Sum of the accepted local error estimates (max-norm).
    pub error_estimate: T,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

fn combo<T: Real>(out: &mut [C<T>], y: &[C<T>], h: T, terms: &[(f64, &[C<T>])]) {
    for i in 0..y.len() {
        let mut acc = C::zero();
        for (c, k) in terms {
            acc += k[i] * T::lit(*c);
        }
        out[i] = y[i] + acc * h;
    }
}

/// Integrates `y' = f(s, y)` from `s0` to `s1` (`s1 > s0`). The observer sees
/// every accepted step `(s, y)`, starting with the initial point.
pub fn integrate<T, F, O>(
    mut f: F,
    s0: T,
    s1: T,
    y0: &[C<T>],
    opts: &OdeOptions<T>,
    mut observer: O,
) -> Result<(Vec<C<T>>, OdeStats<T>)>
where
    T: Real,
    F: FnMut(T, &[C<T>], &mut [C<T>]) -> Result<()>,
    O: FnMut(T, &[C<T>]),
{
    let n = y0.len();
    let mut stats = OdeStats { error_estimate: T::zero(), ..Default::default() };
    let mut y = y0.to_vec();
    observer(s0, &y);
    let span = s1 - s0;
    if span <= T::zero() {
        return Ok((y, stats));
    }
    let h_min = opts.h_min_rel * span.max(T::one());
    let mut k1 = vec![C::zero(); n];
    let mut k2 = vec![C::zero(); n];
    let mut k3 = vec![C::zero(); n];
    let mut k4 = vec![C::zero(); n];
    let mut k5 = vec![C::zero(); n];
    let mut k6 = vec![C::zero(); n];
    let mut k7 = vec![C::zero(); n];
    let mut tmp = vec![C::zero(); n];
    let mut ynew = vec![C::zero(); n];

    f(s0, &y, &mut k1)?;
    stats.evaluations += 1;

    let mut h = match opts.h_init {
        Some(h) => h,
        None => {
            let ny = y.iter().map(|z| z.norm()).fold(T::zero(), T::max);
            let nf = k1.iter().map(|z| z.norm()).fold(T::zero(), T::max);
            let scale = opts.atol + opts.rtol * ny;
            let h = if nf > T::zero() { T::lit(0.01) * scale.max(opts.rtol) / (nf * opts.rtol.powf(T::lit(0.8))) } else { span };
            h.min(span * T::lit(0.1)).max(h_min * T::lit(10.0))
        }
    };
    let mut s = s0;
    let mut err_prev = T::lit(1e-4);
    let safety = T::lit(0.9);
    let alpha = T::lit(0.7 / 5.0);
    let beta = T::lit(0.4 / 5.0);

    while s < s1 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::NoConvergence { what: "adaptive integrator step budget", residual: (s1 - s).as_f64() });
        }
        let last = s + h >= s1;
        if last {
            h = s1 - s;
        }
        combo(&mut tmp, &y, h, &[(A21, &k1)]);
        f(s + T::lit(C2) * h, &tmp, &mut k2)?;
        combo(&mut tmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        f(s + T::lit(C3) * h, &tmp, &mut k3)?;
        combo(&mut tmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(s + T::lit(C4) * h, &tmp, &mut k4)?;
        combo(&mut tmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        f(s + T::lit(C5) * h, &tmp, &mut k5)?;
        combo(&mut tmp, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        f(s + h, &tmp, &mut k6)?;
        combo(&mut ynew, &y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        f(s + h, &ynew, &mut k7)?;
        stats.evaluations += 6;

        let mut err = T::zero();
        let mut err_max = T::zero();
        for i in 0..n {
            let e = (k1[i] * T::lit(E1)
                + k3[i] * T::lit(E3)
                + k4[i] * T::lit(E4)
                + k5[i] * T::lit(E5)
                + k6[i] * T::lit(E6)
                + k7[i] * T::lit(E7))
                * h;
            let sc = opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm());
            let r = e.norm() / sc;
            err += r * r;
            err_max = err_max.max(e.norm());
        }
        let err = (err / T::from_count(n.max(1))).sqrt();
        if !err.is_finite() {
            h = h * T::lit(0.1);
            stats.rejected += 1;
            if h < h_min {
                return Err(Error::StepUnderflow { at: s.as_f64(), hint: "" });
            }
            continue;
        }
        if err <= T::one() {
            s = if last { s1 } else { s + h };
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            stats.accepted += 1;
            stats.error_estimate += err_max;
            observer(s, &y);
            let err_c = err.max(T::lit(1e-10));
            let fac = safety * err_c.powf(-alpha) * err_prev.powf(beta);
            h = h * fac.max(T::lit(0.2)).min(T::lit(5.0));
            err_prev = err_c;
        } else {
            stats.rejected += 1;
            let fac = safety * err.powf(-alpha);
            h = h * fac.max(T::lit(0.1)).min(T::one());
        }
        if h < h_min && s < s1 {
            return Err(Error::StepUnderflow { at: s.as_f64(), hint: "" });
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    #[test]
    fn complex_exponential() {
        // y' = i y, y(0) = 1 → y(2π) = 1
        let opts = OdeOptions::with_tol(1e-12);
        let (y, stats) = integrate(
            |_s, y: &[Complex<f64>], dy: &mut [Complex<f64>]| {
                dy[0] = y[0] * Complex::i();
                Ok(())
            },
            0.0,
            std::f64::consts::TAU,
            &[Complex::new(1.0, 0.0)],
            &opts,
            |_, _| {},
        )
        .unwrap();
        assert!((y[0] - Complex::new(1.0, 0.0)).norm() < 1e-10);
        assert!(stats.accepted > 5);
    }

    #[test]
    fn observer_sees_endpoints() {
        let mut seen = vec![];
        let opts = OdeOptions::with_tol(1e-8);
        integrate(
            |_s, _y: &[Complex<f64>], dy: &mut [Complex<f64>]| {
                dy[0] = Complex::new(1.0, 0.0);
                Ok(())
            },
            0.0,
            3.0,
            &[Complex::new(0.0, 0.0)],
            &opts,
            |s, y| seen.push((s, y[0])),
        )
        .unwrap();
        assert_eq!(seen.first().unwrap().0, 0.0);
        let (s, y) = *seen.last().unwrap();
        assert_eq!(s, 3.0);
        assert!((y.re - 3.0).abs() < 1e-12);
    }

    #[test]
    fn blow_up_underflows() {
        // y' = y², y(0) = 1 blows up at s = 1
        let opts = OdeOptions::with_tol(1e-10);
        let r = integrate(
            |_s, y: &[Complex<f64>], dy: &mut [Complex<f64>]| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            0.0,
            2.0,
            &[Complex::new(1.0, 0.0)],
            &opts,
            |_, _| {},
        );
        assert!(matches!(r, Err(Error::StepUnderflow { .. }) | Err(Error::NoConvergence { .. })));
    }
}
