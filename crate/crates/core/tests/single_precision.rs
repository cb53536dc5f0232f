//! The same pipeline in `f32`, at tolerances `f32` can meet.

use isomonodromy::frobenius::{build_local_series, LocalOptions};
use isomonodromy::path::{choose_basepoint, default_loop_clearance, generator_loops, generator_monodromies};
use isomonodromy::schlesinger::{integrate_flow, SchlesingerState, TPath};
use isomonodromy::{sample, FuchsianSystem, Matrix32};
use num_complex::Complex;

fn c(re: f32, im: f32) -> Complex<f32> {
    Complex::new(re, im)
}

#[test]
fn scalar_monodromy_f32() {
    let s = FuchsianSystem::zero_sum(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![Matrix32::scalar(1, c(0.5, 0.0)), Matrix32::scalar(1, c(-0.5, 0.0))])
        .unwrap();
    let loops = generator_loops(&s, choose_basepoint(&s), default_loop_clearance(&s)).unwrap();
    let ms = generator_monodromies(&s, &loops, 1e-5).unwrap();
    for m in &ms {
        assert!((m.m[(0, 0)] + c(1.0, 0.0)).norm() < 1e-3, "{:?}", m.m);
    }
}

#[test]
fn random_system_f32() {
    let s: FuchsianSystem<f32> = sample::zero_sum_system(&mut sample::rng(1), 2, 3, 0.4, 0.05);
    let loops = generator_loops(&s, choose_basepoint(&s), default_loop_clearance(&s)).unwrap();
    let ms: Vec<Matrix32> = generator_monodromies(&s, &loops, 1e-5).unwrap().into_iter().map(|m| m.m).collect();
    assert!(loops.ordered_product(&ms).distance(&Matrix32::identity(2)) < 1e-3);

    let local = build_local_series(&s, 0, &LocalOptions::new(1e-5)).unwrap();
    assert!(local.order() > 0 && local.max_residual < 1e-4);

    let st = SchlesingerState::from_system(&s);
    let mut b = st.t.clone();
    b[1] += c(0.02, 0.01);
    let f = integrate_flow(&st, &TPath::straight(st.t.clone(), b).unwrap(), 1e-5).unwrap();
    assert!(f.sum_drift < 1e-5);
}

#[test]
fn cast_agrees_with_f64() {
    let s64: FuchsianSystem<f64> = sample::zero_sum_system(&mut sample::rng(2), 2, 3, 0.4, 0.05);
    let s32: FuchsianSystem<f32> = s64.cast();
    let x = Complex::new(3.0, 0.5);
    let a = s64.coefficient_at(x).unwrap();
    let b = s32.coefficient_at(c(3.0, 0.5)).unwrap().cast::<f64>();
    assert!(a.distance(&b) < 1e-5);
}
