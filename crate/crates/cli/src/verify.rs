//! Self-checks runnable from a release build.

use std::f64::consts::PI;
use std::fmt;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use whitham_core::characteristics::{q_integral_bounds, q_monotonicity, slope_series};
use whitham_core::hypothesis::{alpha_range, sigma_value, stirling_lemma_check, Theorem};
use whitham_core::singular_integral::{calibration_constant, kernel_apply_direct, kn_bound, KernelEvaluator};
use whitham_core::solver::{
    conserved_diagnostics, energy_identity_check, run, scaling_symmetry_error, Physics, SolverConfig, SolverState,
};
use whitham_core::spectral::{dispersion_apply, spectral_derivative, Alpha, GridFunction};

use crate::CmdResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Operators,
    Lemmas,
    Energy,
    Scaling,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyRow {
    pub check: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl VerifyRow {
    /// Passes when `measured <= tolerance`.
    fn below(check: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            measured,
            tolerance,
            pass: measured <= tolerance,
        }
    }
}

impl fmt::Display for VerifyRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<44} {:>12.3e} {:>12.1e}  {}",
            self.check,
            self.measured,
            self.tolerance,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

fn alpha(a: f64) -> CmdResult<Alpha> {
    Ok(Alpha::new(a)?)
}

fn random_field(rng: &mut StdRng, n: usize, modes: usize) -> CmdResult<GridFunction> {
    let coef: Vec<(f64, f64)> = (0..modes).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    Ok(GridFunction::from_fn(2.0 * PI, n, |x| {
        coef.iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let k = (i + 1) as f64;
                (a * (k * x).cos() + b * (k * x).sin()) / k
            })
            .sum()
    })?)
}

fn operators() -> CmdResult<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    for a in [0.2, 0.5, 1.0, 2.0, 3.0] {
        let mut worst: f64 = 0.0;
        for k in 1..=8 {
            let kf = k as f64;
            let u = GridFunction::from_fn(2.0 * PI, 64, |x| (kf * x).cos())?;
            let d = dispersion_apply(&u, alpha(a)?)?;
            for (x, v) in u.nodes().iter().zip(d.values()) {
                worst = worst.max((v - kf.powf(a) * (kf * x).sin()).abs() / kf.powf(a));
            }
        }
        rows.push(VerifyRow::below(format!("dispersion on cos(kx), alpha {a}"), worst, 1e-10));
    }
    let mut rng = StdRng::seed_from_u64(1);
    let u = random_field(&mut rng, 64, 10)?;
    let (d, dx3) = (dispersion_apply(&u, alpha(3.0)?)?, spectral_derivative(&u, 3)?);
    let diff = d.coeffs().iter().zip(dx3.coeffs()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    rows.push(VerifyRow::below("alpha 3 equals third derivative", diff, 0.0));

    let a = alpha(0.35)?;
    let c = calibration_constant(a)?;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let u = random_field(&mut rng, 32, 6)?;
        let spectral = dispersion_apply(&u, a)?.interpolant();
        let x = rng.gen_range(0.0..2.0 * PI);
        let direct = c * kernel_apply_direct(&u, a, 0, x, 0.3)?.total;
        let s = spectral.eval(x);
        worst = worst.max((direct - s).abs() / s.abs().max(1e-3));
    }
    rows.push(VerifyRow::below("split quadrature vs spectral", worst, 1e-6));

    let mut violations = 0.0;
    for _ in 0..5 {
        let u = random_field(&mut rng, 32, 5)?;
        for n in 0..=2 {
            let ev = KernelEvaluator::new(&u, a, n)?;
            for delta in [0.1, 1.0] {
                let bound = kn_bound(a, delta, ev.f_sup(), ev.df_sup());
                for j in (0..32).step_by(4) {
                    if ev.eval(u.node(j), delta)?.total.abs() > bound {
                        violations += 1.0;
                    }
                }
            }
        }
    }
    rows.push(VerifyRow::below("kernel bound violations", violations, 0.0));
    Ok(rows)
}

fn lemmas() -> CmdResult<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    let mut fails = 0.0;
    for a in [0.1, 0.2, 0.3, 0.45] {
        for n in 3..=40 {
            if !stirling_lemma_check(n, alpha(a)?)?.holds {
                fails += 1.0;
            }
        }
    }
    rows.push(VerifyRow::below("combinatorial lemma failures, n=3..40", fails, 0.0));
    rows.push(VerifyRow::below(
        "alpha range at eps->0, Gevrey data",
        (alpha_range(1e-14, Theorem::Gevrey)? - 0.5).abs(),
        1e-12,
    ));
    rows.push(VerifyRow::below(
        "alpha range at eps->0, H^2 data",
        (alpha_range(1e-14, Theorem::Sobolev)? - 1.0 / 3.0).abs(),
        1e-12,
    ));
    let mut rng = StdRng::seed_from_u64(9);
    let mut mismatches = 0.0;
    for _ in 0..100 {
        let eps = rng.gen_range(0.001..0.9);
        let a = rng.gen_range(0.001..0.6);
        if sigma_value(eps, alpha(a)?)?.sigma_alpha_lt_1 != (a < alpha_range(eps, Theorem::Gevrey)?) {
            mismatches += 1.0;
        }
    }
    rows.push(VerifyRow::below("sigma flag vs alpha range mismatches", mismatches, 0.0));

    let mut c = SolverConfig::new(alpha(1.0)?, 2.0 * PI, 128, 2e-3, 0.9);
    c.dispersion = false;
    c.cfl_safety = 0.25;
    c.snapshot_every = 5;
    c.refine_threshold = 1e-20;
    let traj = run(&c, GridFunction::from_fn(2.0 * PI, 128, |x| -x.sin())?)?;
    let slope = slope_series(&traj)?;
    let mono = q_monotonicity(&slope, slope.len());
    rows.push(VerifyRow::below("Burgers q increase", mono.worst_increase, 1e-9));
    for s in [2.0, 1.0] {
        let q = q_integral_bounds(&slope, 0.1, s)?;
        rows.push(VerifyRow::below(format!("Burgers q-integral ratio, s={s}"), q.worst_ratio, 1.0 + 1e-6));
    }
    Ok(rows)
}

fn energy() -> CmdResult<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    let u = GridFunction::from_fn(2.0 * PI, 128, |x| {
        -x.sin() + 0.3 * (2.0 * x + 0.4).cos() + 0.2 * (3.0 * x + 1.1).sin()
    })?;
    for a in [0.2, 0.5, 1.5] {
        let e = energy_identity_check(&SolverState::initial(u.clone()), &Physics::full(alpha(a)?), 1e-4)?;
        rows.push(VerifyRow::below(format!("curvature identity residual, alpha {a}"), e.residual, 1e-4));
    }
    let mut c = SolverConfig::new(alpha(3.0)?, 2.0 * PI, 64, 1e-3, 1.0);
    c.snapshot_every = 1000;
    let traj = run(&c, GridFunction::from_fn(2.0 * PI, 64, |x| 0.1 * x.cos())?)?;
    rows.push(VerifyRow::below(
        "KdV L2 drift to t=1",
        conserved_diagnostics(&traj.last().state).l2_drift,
        1e-8,
    ));
    Ok(rows)
}

fn scaling() -> CmdResult<Vec<VerifyRow>> {
    [0.3, 0.5]
        .into_iter()
        .map(|a| {
            let c = SolverConfig::new(alpha(a)?, 2.0 * PI, 128, 2e-3, 0.4);
            let err = scaling_symmetry_error(&c, |x| -0.8 * x.sin() + 0.3 * (2.0 * x + 0.5).cos(), 2.0)?;
            Ok(VerifyRow::below(format!("scaling symmetry lambda=2, alpha {a}"), err, 1e-6))
        })
        .collect()
}

pub fn verify(suite: Suite) -> CmdResult<Vec<VerifyRow>> {
    match suite {
        Suite::Operators => operators(),
        Suite::Lemmas => lemmas(),
        Suite::Energy => energy(),
        Suite::Scaling => scaling(),
    }
}
