use std::f64::consts::PI;

use proptest::prelude::*;
use whitham_core::hypothesis::{
    alpha_range, amplitude_threshold, check_gevrey, check_sobolev, constants_feasible, datum_factory,
    default_constants, norm_inputs, sigma_value, stirling_lemma_check, Constants, DatumKind, Theorem,
};
use whitham_core::spectral::{spectral_derivative, Alpha};

fn alpha(a: f64) -> Alpha {
    Alpha::new(a).unwrap()
}

fn sine(a: f64) -> whitham_core::hypothesis::DatumProfile {
    datum_factory(DatumKind::ScaledSine, a, 0.0, 2.0 * PI, 64).unwrap()
}

#[test]
fn alpha_range_limits() {
    assert!((alpha_range(1e-14, Theorem::Gevrey).unwrap() - 0.5).abs() < 1e-12);
    assert!((alpha_range(1e-14, Theorem::Sobolev).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    let independent = 0.81 / 3.183;
    assert!((alpha_range(0.1, Theorem::Gevrey).unwrap() - independent).abs() < 1e-14);
}

#[test]
fn sigma_at_small_eps() {
    let s = sigma_value(1e-12, alpha(0.49)).unwrap();
    assert!((s.sigma - 2.0).abs() < 1e-8);
    assert!(s.sigma_alpha_lt_1);
    assert!(!sigma_value(1e-12, alpha(0.51)).unwrap().sigma_alpha_lt_1);
}

#[test]
fn stirling_holds_on_sweep() {
    for &a in &[0.1, 0.2, 0.3, 0.45] {
        for n in 3..=40 {
            let c = stirling_lemma_check(n, alpha(a)).unwrap();
            assert!(c.holds, "n={n} alpha={a}: {} > {}", c.log_lhs, c.log_rhs);
            assert!(c.log_lhs.is_finite() && c.log_rhs.is_finite());
        }
    }
}

#[test]
fn stirling_direct_sum_agrees_at_moderate_n() {
    let a = 0.3;
    let n = 12usize;
    let binom = |n: usize, k: usize| (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64);
    let pw = |m: usize| (m as f64).powf(m as f64 / a);
    let direct: f64 = (2..n).map(|j| binom(n, j) * pw(j - 1) * pw(n - j)).sum();
    let c = stirling_lemma_check(n, alpha(a)).unwrap();
    assert!((c.lhs - direct).abs() < 1e-10 * direct);
}

#[test]
fn sobolev_c2_floor_for_sine() {
    let a = 0.2;
    let w = constants_feasible(&sine(1.0), alpha(a), 0.1, Theorem::Sobolev).unwrap();
    let exact = (2.0 * PI / (1.0 - 2.0 * a)).sqrt();
    assert!((w.c2.lower - exact).abs() < 1e-10 * exact);
    let n = norm_inputs(&sine(1.0).grid, alpha(a)).unwrap();
    assert!((n.d2_l2 - PI.sqrt()).abs() < 1e-12);
}

#[test]
fn c1_window_width_when_sup_is_at_infimum() {
    // For -A sin x the largest |phi'| is attained where phi' is most negative.
    let eps = 0.1;
    for &amp in &[0.5, 1.0, 7.0] {
        let w = constants_feasible(&sine(amp), alpha(0.2), eps, Theorem::Gevrey).unwrap();
        assert!(w.feasible);
        let expected = eps / (1.0 - eps) * amp;
        assert!((w.c1.width() - expected).abs() < 1e-10 * expected, "{} vs {expected}", w.c1.width());
    }
}

#[test]
fn sine_fails_steepness_condition() {
    let phi = sine(1.0);
    let k = default_constants(&phi, alpha(0.2), 0.1, Theorem::Gevrey, 8).unwrap();
    let r = check_gevrey(&phi, alpha(0.2), 0.1, k, 8).unwrap();
    let m1 = r.record("steepness.norm").unwrap();
    assert!(!m1.satisfied);
    assert!(m1.rhs > 2.0 / 0.2 * 3.0 * k.c1);
    assert!(!r.overall);
    assert!(r.records.iter().all(|x| x.margin.is_finite()));
}

#[test]
fn gevrey_holds_for_sine_above_amplitude() {
    let amp = 2.5;
    let phi = sine(amp);
    let k = Constants { c0: 100.0, c1: 3.0, c2: amp * 1.001 };
    let r = check_gevrey(&phi, alpha(0.2), 0.1, k, 12).unwrap();
    let g = r.gevrey.as_ref().unwrap();
    assert_eq!(g.first_violation, None);
    let k = Constants { c2: amp * 0.999, ..k };
    let r = check_gevrey(&phi, alpha(0.2), 0.1, k, 12).unwrap();
    assert_eq!(r.gevrey.unwrap().first_violation, Some(2));
}

#[test]
fn steepness_threshold_is_sharp() {
    let phi = sine(1.0);
    for (theorem, names) in [(Theorem::Gevrey, vec!["steepness.norm"]), (Theorem::Sobolev, vec!["steepness.norm", "steepness.ratio"])] {
        let t = amplitude_threshold(&phi, alpha(0.2), 0.1, theorem, &names, 8).unwrap().unwrap();
        let check = |c: f64| {
            let p = phi.scaled(c).unwrap();
            let k = default_constants(&p, alpha(0.2), 0.1, theorem, 8).unwrap();
            let r = match theorem {
                Theorem::Gevrey => check_gevrey(&p, alpha(0.2), 0.1, k, 8).unwrap(),
                Theorem::Sobolev => check_sobolev(&p, alpha(0.2), 0.1, k).unwrap(),
            };
            r.satisfies(&names)
        };
        assert!(check(t.factor * (1.0 + 1e-8)));
        assert!(!check(t.factor * (1.0 - 1e-8)));
        assert!(t.factor > 1.0);
    }
}

#[test]
fn reports_are_reproducible() {
    let phi = datum_factory(DatumKind::BumpDerivative, 40.0, 0.4, 16.0, 512).unwrap();
    let k = default_constants(&phi, alpha(0.2), 0.1, Theorem::Gevrey, 8).unwrap();
    let a = serde_json::to_string(&check_gevrey(&phi, alpha(0.2), 0.1, k, 8).unwrap()).unwrap();
    let b = serde_json::to_string(&check_gevrey(&phi, alpha(0.2), 0.1, k, 8).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bump_tail_at_eight_cells() {
    let (l, n) = (16.0, 256);
    let lam = 8.0 * l / n as f64;
    let p = datum_factory(DatumKind::BumpDerivative, 1.0, lam, l, n).unwrap();
    assert!(whitham_core::hypothesis::spectral_tail(&p.grid) < 1e-12);
}

#[test]
fn bump_slope_scales_inverse_square_width() {
    let l = 16.0;
    let slope = |lam: f64| {
        let p = datum_factory(DatumKind::BumpDerivative, 1.0, lam, l, 1024).unwrap();
        spectral_derivative(&p.grid, 1).unwrap().min_refined().1
    };
    let (s1, s2) = (slope(0.5), slope(1.0));
    assert!((s1 / s2 - 4.0).abs() < 1e-9);
    // d^2/dx^2 of exp(-s^2) at s = sqrt(3/2) gives 4 e^{-3/2}.
    assert!((s2 + 4.0 * (-1.5f64).exp()).abs() < 1e-10);
}

#[test]
fn sine_infimum_slope() {
    let l = 5.0;
    let p = datum_factory(DatumKind::ScaledSine, 1.0, 0.0, l, 64).unwrap();
    let d = spectral_derivative(&p.grid, 1).unwrap();
    assert!((d.values()[0] + 2.0 * PI / l).abs() < 1e-12);
    assert!((p.shape_constant - 2.0 * PI / l).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sigma_flag_matches_alpha_range(eps in 0.001f64..0.9, a in 0.001f64..0.6) {
        let flag = sigma_value(eps, alpha(a)).unwrap().sigma_alpha_lt_1;
        let bound = alpha_range(eps, Theorem::Gevrey).unwrap();
        // sigma is nudged up by 1e-9, which only moves the boundary by that much.
        prop_assume!((a - bound).abs() > 1e-8 * bound);
        prop_assert_eq!(flag, a < bound);
    }

    #[test]
    fn alpha_range_decreasing(e1 in 0.001f64..0.99, e2 in 0.001f64..0.99) {
        prop_assume!(e1 < e2);
        for th in [Theorem::Gevrey, Theorem::Sobolev] {
            prop_assert!(alpha_range(e1, th).unwrap() > alpha_range(e2, th).unwrap());
        }
    }

    #[test]
    fn norm_inputs_homogeneous(c in 0.1f64..50.0) {
        let base = datum_factory(DatumKind::BumpDerivative, 1.0, 0.6, 12.0, 256).unwrap();
        let a = alpha(0.25);
        let n0 = norm_inputs(&base.grid, a).unwrap();
        let n1 = norm_inputs(&base.scaled(c).unwrap().grid, a).unwrap();
        for (x, y) in [(n0.sup, n1.sup), (n0.sup_d1, n1.sup_d1), (n0.inf_d1, n1.inf_d1), (n0.h2, n1.h2), (n0.h3, n1.h3), (n0.d2_l2, n1.d2_l2)] {
            prop_assert!((c * x - y).abs() <= 1e-12 * y.abs());
        }
        let w0 = constants_feasible(&base, a, 0.1, Theorem::Gevrey).unwrap();
        let w1 = constants_feasible(&base.scaled(c).unwrap(), a, 0.1, Theorem::Gevrey).unwrap();
        prop_assert!((c * w0.c1.lower - w1.c1.lower).abs() <= 1e-12 * w1.c1.lower);
        prop_assert!((c * w0.c2.upper.unwrap() - w1.c2.upper.unwrap()).abs() <= 1e-12 * w1.c2.upper.unwrap());
    }
}
