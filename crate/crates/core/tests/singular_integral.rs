use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use statrs::function::gamma::gamma;
use whitham_core::singular_integral::{
    calibration_constant, k1_bound_holder, kernel_apply_direct, kn_bound, kn_bound_optimal_delta, KernelEvaluator,
};
use whitham_core::spectral::{dispersion_apply, spectral_derivative, Alpha, GridFunction};

fn alpha(a: f64) -> Alpha {
    Alpha::new(a).unwrap()
}

/// Symbol of the raw kernel integral on exp(i xi x) is
/// `2 i sgn(xi) |xi|^alpha Gamma(1-alpha) sin(pi alpha/2) / alpha`.
fn closed_form_constant(a: f64) -> f64 {
    -a / (2.0 * gamma(1.0 - a) * (PI * a / 2.0).sin())
}

fn random_field(rng: &mut StdRng, period: f64, n: usize, modes: usize) -> GridFunction {
    let coef: Vec<(f64, f64)> = (0..modes).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    GridFunction::from_fn(period, n, |x| {
        coef.iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let k = (i + 1) as f64 * 2.0 * PI / period;
                (a * (k * x).cos() + b * (k * x).sin()) / (i + 1) as f64
            })
            .sum()
    })
    .unwrap()
}

#[test]
fn calibration_matches_closed_form() {
    for &a in &[0.1, 0.2, 0.35, 0.5, 0.75] {
        let c = calibration_constant(alpha(a)).unwrap();
        let exact = closed_form_constant(a);
        assert!((c - exact).abs() < 1e-8 * exact.abs(), "alpha {a}: {c} vs {exact}");
    }
}

#[test]
fn calibration_near_one_is_finite() {
    let c = calibration_constant(alpha(0.99)).unwrap();
    assert!(c.is_finite() && c != 0.0);
    assert!((c - closed_form_constant(0.99)).abs() < 1e-6 * c.abs());
}

#[test]
fn ratio_to_spectral_is_position_independent() {
    let a = alpha(0.35);
    let u = GridFunction::from_fn(2.0 * PI, 32, |x| x.cos()).unwrap();
    let spectral = dispersion_apply(&u, a).unwrap().interpolant();
    let direct = KernelEvaluator::new(&u, a, 0).unwrap();
    let ratios: Vec<f64> = [0.3, 0.9, 1.7, 2.4, 4.0]
        .iter()
        .map(|&x| spectral.eval(x) / direct.eval(x, 0.4).unwrap().total)
        .collect();
    for r in &ratios {
        assert!((r - ratios[0]).abs() < 1e-6 * ratios[0].abs(), "{ratios:?}");
    }
}

#[test]
fn first_order_kernel_matches_spectral_derivative_path() {
    let a = alpha(0.5);
    let c = calibration_constant(a).unwrap();
    let u = GridFunction::from_fn(2.0 * PI, 32, |x| x.cos()).unwrap();
    let spectral = dispersion_apply(&spectral_derivative(&u, 1).unwrap(), a).unwrap().interpolant();
    for &x in &[0.2, 1.1, 2.9] {
        let d = kernel_apply_direct(&u, a, 1, x, 0.3).unwrap().total * c;
        let s = spectral.eval(x);
        assert!((d - s).abs() < 1e-6 * s.abs().max(1e-3), "x={x}: {d} vs {s}");
    }
}

#[test]
fn split_radius_independence() {
    let mut rng = StdRng::seed_from_u64(7);
    let a = alpha(0.35);
    for _ in 0..3 {
        let u = random_field(&mut rng, 2.0 * PI, 32, 6);
        let ev = KernelEvaluator::new(&u, a, 0).unwrap();
        let x = rng.gen_range(0.0..2.0 * PI);
        let reference = ev.eval(x, 0.1).unwrap().total;
        for &delta in &[0.01, 0.03, 0.3, 1.0] {
            let t = ev.eval(x, delta).unwrap().total;
            assert!((t - reference).abs() < 1e-8 * reference.abs().max(1e-2), "delta {delta}: {t} vs {reference}");
        }
    }
}

#[test]
fn bound_dominates_measured_kernel() {
    let mut rng = StdRng::seed_from_u64(11);
    for trial in 0..4 {
        let a = alpha([0.2, 0.35, 0.45, 0.7][trial]);
        let u = random_field(&mut rng, 2.0 * PI, 32, 5);
        for n in 0..=2 {
            let ev = KernelEvaluator::new(&u, a, n).unwrap();
            let c = calibration_constant(a).unwrap().abs();
            for &delta in &[0.1, 1.0] {
                let bound = kn_bound(a, delta, ev.f_sup(), ev.df_sup());
                for j in (0..32).step_by(4) {
                    let k = ev.eval(u.node(j), delta).unwrap().total;
                    assert!(k.abs() <= bound, "n={n} delta={delta}: |K|={} bound={bound}", k.abs());
                    assert!(c * k.abs() <= bound);
                }
            }
        }
    }
}

#[test]
fn holder_bound_dominates_first_order_kernel() {
    let mut rng = StdRng::seed_from_u64(5);
    let a = alpha(0.3);
    for _ in 0..3 {
        let u = random_field(&mut rng, 2.0 * PI, 32, 5);
        let ev = KernelEvaluator::new(&u, a, 1).unwrap();
        let v2_l2 = u.derivative_l2_norm(2);
        for &delta in &[0.1, 1.0] {
            let bound = k1_bound_holder(a, delta, ev.f_sup(), v2_l2).unwrap();
            for j in (0..32).step_by(8) {
                assert!(ev.eval(u.node(j), delta).unwrap().total.abs() <= bound);
            }
        }
    }
}

#[test]
fn optimal_split_radius_minimizes_bound() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..20 {
        let a = alpha(rng.gen_range(0.05..0.95));
        let (vn, vn1) = (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
        let best = kn_bound(a, kn_bound_optimal_delta(a, vn, vn1), vn, vn1);
        for _ in 0..100 {
            let d = rng.gen_range(1e-3..10.0);
            assert!(best <= kn_bound(a, d, vn, vn1) * (1.0 + 1e-12));
        }
    }
}
