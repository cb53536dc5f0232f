//! Seeded random systems for property checks and negative controls.

use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fuchsian::FuchsianSystem;
use crate::linalg::ComplexMatrix;
use crate::scalar::{Real, C};

/// The crate's deterministic generator.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex<T: Real, R: Rng>(rng: &mut R, scale: f64) -> C<T> {
    Complex::new(T::lit(rng.gen_range(-1.0..1.0) * scale), T::lit(rng.gen_range(-1.0..1.0) * scale))
}

/// Entries uniform in the square `[−scale, scale]²`.
pub fn matrix<T: Real, R: Rng>(rng: &mut R, k: usize, scale: f64) -> ComplexMatrix<T> {
    ComplexMatrix::from_fn(k, |_, _| complex(rng, scale))
}

/// `n` poles in the disk of radius `radius` with pairwise gaps at least `min_gap`.
pub fn poles<T: Real, R: Rng>(rng: &mut R, n: usize, radius: f64, min_gap: f64) -> Vec<C<T>> {
    loop {
        let mut out: Vec<Complex<f64>> = Vec::with_capacity(n);
        let mut tries = 0;
        while out.len() < n && tries < 10_000 {
            tries += 1;
            let z = Complex::from_polar(radius * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU));
            if out.iter().all(|w| (w - z).norm() >= min_gap) {
                out.push(z);
            }
        }
        if out.len() == n {
            return out.into_iter().map(|z| Complex::new(T::lit(z.re), T::lit(z.im))).collect();
        }
    }
}

/// Random residues with `Σ Qⱼ = 0`, each non-resonant with integer separation
/// at least `margin`.
pub fn zero_sum_system<T: Real, R: Rng>(rng: &mut R, k: usize, n: usize, scale: f64, margin: f64) -> FuchsianSystem<T> {
    let t = poles(rng, n, 2.0, 1.0);
    loop {
        let mut qs: Vec<ComplexMatrix<T>> = (0..n.saturating_sub(1)).map(|_| matrix(rng, k, scale)).collect();
        let sum = qs.iter().fold(ComplexMatrix::zeros(k), |a, q| a + q);
        qs.push(-sum);
        let sys = FuchsianSystem::zero_sum(t.clone(), qs).expect("valid random system");
        let ok = (0..n).all(|j| sys.resonance_report(j).map_or(false, |r| r.margin >= T::lit(margin)));
        if ok {
            return sys;
        }
    }
}

/// Diagonal (hence commuting) residues with `Σ Qⱼ = 0`.
pub fn commuting_system<T: Real, R: Rng>(rng: &mut R, k: usize, n: usize, scale: f64) -> FuchsianSystem<T> {
    let t = poles(rng, n, 2.0, 1.0);
    let mut qs: Vec<ComplexMatrix<T>> = (0..n - 1)
        .map(|_| {
            let d: Vec<C<T>> = (0..k).map(|_| complex(rng, scale)).collect();
            ComplexMatrix::from_diag(&d)
        })
        .collect();
    let sum = qs.iter().fold(ComplexMatrix::zeros(k), |a, q| a + q);
    qs.push(-sum);
    FuchsianSystem::zero_sum(t, qs).expect("valid random system")
}

/// Rank-one projector `u vᵀ/(vᵀu)`.
pub fn projector<T: Real, R: Rng>(rng: &mut R, k: usize) -> ComplexMatrix<T> {
    loop {
        let u: Vec<C<T>> = (0..k).map(|_| complex(rng, 1.0)).collect();
        let v: Vec<C<T>> = (0..k).map(|_| complex(rng, 1.0)).collect();
        let d: C<T> = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        if d.norm() > T::lit(0.3) {
            return ComplexMatrix::from_fn(k, |i, j| u[i] * v[j] / d);
        }
    }
}
