use std::f64::consts::PI;

use whitham_core::characteristics::{
    advect, advect_with, breaking_bracket, detect_with_refinement, k1_small_window, q_integral_bounds,
    q_monotonicity, residual_vn, sandwich_check, sigma_from_paths, sigma_set_diagnostic, slope_series,
    slope_series_dense, uxx_bound_check, AdvectOptions, BreakingOptions, FieldHistory, Verdict,
};
use whitham_core::hypothesis::{datum_factory, DatumKind};
use whitham_core::solver::{run, SolverConfig, Trajectory};
use whitham_core::spectral::{Alpha, GridFunction};

const EPS: f64 = 0.1;

fn burgers_config(n: usize, t_end: f64, slope_stop: f64) -> SolverConfig {
    let mut c = SolverConfig::new(Alpha::new(1.0).unwrap(), 2.0 * PI, n, 2e-3, t_end);
    c.dispersion = false;
    c.cfl_safety = 0.25;
    c.slope_stop = slope_stop;
    c.refine_threshold = 1e-20;
    c
}

fn burgers(n: usize, t_end: f64, slope_stop: f64) -> Trajectory {
    let c = burgers_config(n, t_end, slope_stop);
    run(&c, GridFunction::from_fn(2.0 * PI, n, |x| -x.sin()).unwrap()).unwrap()
}

#[test]
fn burgers_breaking_time() {
    let c = burgers_config(256, 2.0, -50.0);
    let u0 = GridFunction::from_fn(2.0 * PI, 256, |x| -x.sin()).unwrap();
    let r = detect_with_refinement(&c, &u0, EPS, BreakingOptions::default()).unwrap().report;
    assert_eq!(r.verdict, Verdict::Breaking, "{r:?}");
    let t = r.t_est.unwrap();
    assert!((t - 1.0).abs() < 0.02, "{t}");
    assert!(r.refinement.unwrap().stable);
    assert_eq!(r.bracket_pass, Some(true));
    let (lo, hi) = breaking_bracket(-1.0, EPS);
    assert!((lo - 1.0 / 1.1).abs() < 1e-15 && (hi - 1.0 / 0.81).abs() < 1e-15);
}

#[test]
fn burgers_slope_follows_riccati() {
    let traj = burgers(256, 0.9, -1e3);
    let s = slope_series_dense(&traj);
    for (t, m) in s.times.iter().zip(&s.m) {
        let exact = -1.0 / (1.0 - t);
        assert!((m - exact).abs() < 1e-4 * exact.abs(), "t={t}: {m} vs {exact}");
    }
}

#[test]
fn burgers_paths_carry_invariants() {
    let mut c = burgers_config(256, 0.8, -1e3);
    c.snapshot_every = 5;
    let traj = run(&c, GridFunction::from_fn(2.0 * PI, 256, |x| -x.sin()).unwrap()).unwrap();
    let seeds = [0.0, 0.4, 1.0, 2.0, 3.0, 5.5];
    for p in advect(&traj, &seeds).unwrap() {
        let (v0, v1) = (p.v(0).unwrap(), p.v(1).unwrap());
        let w = v1[0];
        for (i, t) in p.times.iter().enumerate() {
            assert!((v0[i] - v0[0]).abs() < 1e-8, "x0={} t={t}", p.x0);
            let exact = w / (1.0 + w * t);
            assert!((v1[i] - exact).abs() < 1e-6 * exact.abs().max(1.0), "x0={} t={t}", p.x0);
        }
    }
}

#[test]
fn burgers_lemma_suite() {
    let mut c = burgers_config(256, 0.9, -1e3);
    c.snapshot_every = 5;
    let traj = run(&c, GridFunction::from_fn(2.0 * PI, 256, |x| -x.sin()).unwrap()).unwrap();
    let slope = slope_series(&traj).unwrap();
    assert!(q_monotonicity(&slope, slope.len()).holds);

    for s in [2.0, 1.0, 0.5] {
        let q = q_integral_bounds(&slope, EPS, s).unwrap();
        assert!(q.holds, "{q:?}");
    }
    let k1 = k1_small_window(&traj, &slope, EPS).unwrap();
    assert_eq!(k1.valid_prefix, slope.len());

    let n = slope.len();
    for (t1, t2) in [(0.0, 0.3), (0.2, 0.6), (0.5, 0.9)] {
        let d = sigma_set_diagnostic(&traj, EPS, t1, t2).unwrap();
        assert!(d.nested && d.k1_small, "{d:?}");
        assert!(d.size_t2 > 0);
    }
    let seeds: Vec<f64> = (0..32).map(|j| j as f64 * 2.0 * PI / 32.0).collect();
    let history = FieldHistory::new(&traj);
    let paths = advect_with(&history, &seeds, AdvectOptions { max_order: 1, ..Default::default() }).unwrap();
    let sigma = sigma_from_paths(&paths, &slope, EPS, 0, n - 1, true).unwrap();
    assert!(sigma.nested);
    // The label at the steepest point stays in Sigma throughout.
    let steep = paths.iter().find(|p| p.x0 == 0.0).unwrap();
    let sw = sandwich_check(&slope, steep, EPS, n).unwrap();
    assert!(sw.qr_holds && sw.dr_holds, "{sw:?}");

    let uxx = uxx_bound_check(&traj, &slope, EPS).unwrap();
    assert!(uxx.holds);
}

#[test]
fn residuals_converge_at_second_order() {
    let mut c = SolverConfig::new(Alpha::new(0.3).unwrap(), 2.0 * PI, 128, 1e-3, 0.3);
    c.refine_threshold = 1e-20;
    let traj = run(&c, GridFunction::from_fn(2.0 * PI, 128, |x| -x.sin() + 0.2 * (2.0 * x).cos()).unwrap()).unwrap();
    let history = FieldHistory::new(&traj);
    let paths = advect_with(&history, &[0.0, 1.0, 2.5], AdvectOptions::default()).unwrap();
    for p in &paths {
        for n in 0..=1 {
            let errs: Vec<f64> = [4e-4, 2e-4, 1e-4]
                .iter()
                .map(|&h| {
                    let r = residual_vn(&history, p, n, h).unwrap();
                    let k = r.times.len() / 2;
                    r.residual[k].abs() / r.scale[k]
                })
                .collect();
            assert!(errs.iter().all(|e| *e < 1e-3), "{errs:?}");
            for w in errs.windows(2) {
                let order = (w[0] / w[1]).log2();
                assert!((order - 2.0).abs() < 0.2, "n={n} x0={}: {errs:?}", p.x0);
            }
        }
    }
}

#[test]
fn fractional_k1_window_and_lemmas() {
    let p = datum_factory(DatumKind::BumpDerivative, 300.0 / (4.0 * (-1.5f64).exp()), 1.0, 32.0, 1024).unwrap();
    let mut c = SolverConfig::new(Alpha::new(0.2).unwrap(), 32.0, 1024, 1e-4, 1.0);
    c.slope_stop = -1e3;
    c.snapshot_every = 2;
    let traj = run(&c, p.grid).unwrap();
    let slope = slope_series(&traj).unwrap();
    let w = k1_small_window(&traj, &slope, EPS).unwrap();
    assert!(w.valid_prefix > 2, "{:?}", &w.k1_sup[..3]);
    let inside = slope.truncated(w.valid_prefix);
    assert!(q_monotonicity(&inside, inside.len()).holds);
    let t2 = inside.times[inside.len() - 1];
    let d = sigma_set_diagnostic(&traj, EPS, 0.5 * t2, t2).unwrap();
    assert!(d.k1_small && d.nested, "{d:?}");
}
