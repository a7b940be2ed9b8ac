//! Characteristics through a stored trajectory, slope tracking and breaking
//! verdicts.
//!
//! Between snapshots the field is interpolated by cubic Hermite polynomials in
//! time (using the stored time derivatives) and trigonometrically in space.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::solver::{run, RunEnd, SolverConfig, Trajectory};
use crate::spectral::{dispersion_apply, spectral_derivative, GridFunction, Interpolant};

/// Highest derivative order tracked along paths.
pub const MAX_TRACKED_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    U,
    Dudt,
    /// Dispersion operator applied to a derivative of `u`.
    K,
}

/// Lazily built spatial interpolants of every snapshot field a path may need.
pub struct FieldHistory<'a> {
    traj: &'a Trajectory,
    cache: Vec<Vec<OnceLock<Interpolant>>>,
}

impl<'a> FieldHistory<'a> {
    pub fn new(traj: &'a Trajectory) -> Self {
        let slots = 3 * (MAX_TRACKED_ORDER + 1);
        Self {
            traj,
            cache: traj
                .snapshots
                .iter()
                .map(|_| (0..slots).map(|_| OnceLock::new()).collect())
                .collect(),
        }
    }

    pub fn trajectory(&self) -> &Trajectory {
        self.traj
    }

    fn interp(&self, i: usize, field: Field, order: usize) -> Result<&Interpolant> {
        if order > MAX_TRACKED_ORDER {
            return domain(format!("derivative order {order} exceeds {MAX_TRACKED_ORDER}"));
        }
        let slot = match field {
            Field::U => 0,
            Field::Dudt => 1,
            Field::K => 2,
        } * (MAX_TRACKED_ORDER + 1)
            + order;
        let cell = &self.cache[i][slot];
        if let Some(v) = cell.get() {
            return Ok(v);
        }
        let snap = &self.traj.snapshots[i];
        let g = match field {
            Field::U => spectral_derivative(&snap.state.u, order)?,
            Field::Dudt => spectral_derivative(&snap.dudt, order)?,
            Field::K => {
                let d = spectral_derivative(&snap.state.u, order)?;
                if self.traj.physics().dispersion {
                    dispersion_apply(&d, self.traj.physics().alpha)?
                } else {
                    GridFunction::zeros(d.domain_length(), d.n_points())?
                }
            }
        };
        Ok(cell.get_or_init(|| g.interpolant()))
    }

    /// `d^n u / dx^n` at `(x, t)`.
    pub fn derivative(&self, order: usize, x: f64, t: f64) -> Result<f64> {
        let i = self.bracket(t)?;
        let (s0, s1) = (&self.traj.snapshots[i], &self.traj.snapshots[i + 1]);
        let h = s1.t() - s0.t();
        let s = (t - s0.t()) / h;
        if s == 0.0 {
            return Ok(self.interp(i, Field::U, order)?.eval(x));
        }
        if s == 1.0 {
            return Ok(self.interp(i + 1, Field::U, order)?.eval(x));
        }
        let p0 = self.interp(i, Field::U, order)?.eval(x);
        let p1 = self.interp(i + 1, Field::U, order)?.eval(x);
        let d0 = self.interp(i, Field::Dudt, order)?.eval(x);
        let d1 = self.interp(i + 1, Field::Dudt, order)?.eval(x);
        let (s2, s3) = (s * s, s * s * s);
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * p0
            + (s3 - 2.0 * s2 + s) * h * d0
            + (3.0 * s2 - 2.0 * s3) * p1
            + (s3 - s2) * h * d1)
    }

    pub fn velocity(&self, x: f64, t: f64) -> Result<f64> {
        self.derivative(0, x, t)
    }

    /// `d^n u / dx^n` at snapshot `i`, without time interpolation.
    pub fn derivative_at_snapshot(&self, i: usize, order: usize, x: f64) -> Result<f64> {
        Ok(self.interp(i, Field::U, order)?.eval(x))
    }

    /// `K_n = (H Lambda^alpha d^n u / dx^n)(x)` at snapshot `i`.
    pub fn kernel_at_snapshot(&self, i: usize, order: usize, x: f64) -> Result<f64> {
        Ok(self.interp(i, Field::K, order)?.eval(x))
    }

    fn bracket(&self, t: f64) -> Result<usize> {
        self.traj.bracket(t).ok_or_else(|| {
            let (a, b) = self.traj.t_range();
            Error::Domain(format!("time {t} lies outside the stored range [{a}, {b}]"))
        })
    }

    /// One classical Runge-Kutta step of `dX/dt = u(X, t)`; `h` may be negative.
    pub fn rk4(&self, x: f64, t: f64, h: f64) -> Result<f64> {
        let k1 = self.velocity(x, t)?;
        let k2 = self.velocity(x + 0.5 * h * k1, t + 0.5 * h)?;
        let k3 = self.velocity(x + 0.5 * h * k2, t + 0.5 * h)?;
        let k4 = self.velocity(x + h * k3, t + h)?;
        Ok(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    }
}

/// A characteristic `X(t; x0)` with `v_n = d^n u/dx^n` sampled along it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharPath {
    pub x0: f64,
    pub times: Vec<f64>,
    /// Unwrapped positions (not reduced modulo the period).
    pub positions: Vec<f64>,
    pub vn_samples: BTreeMap<usize, Vec<f64>>,
    /// The requested end time lay beyond the stored trajectory.
    pub truncated: bool,
}

impl CharPath {
    pub fn v(&self, n: usize) -> Option<&[f64]> {
        self.vn_samples.get(&n).map(Vec::as_slice)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let orders: Vec<usize> = self.vn_samples.keys().copied().collect();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "x".to_string()];
        header.extend(orders.iter().map(|n| format!("v{n}")));
        w.write_record(&header)?;
        for (i, (t, x)) in self.times.iter().zip(&self.positions).enumerate() {
            let mut row = vec![t.to_string(), x.to_string()];
            row.extend(orders.iter().map(|n| self.vn_samples[n][i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AdvectOptions {
    /// Orders `0..=max_order` are sampled.
    pub max_order: usize,
    /// Runge-Kutta steps per snapshot interval.
    pub substeps: usize,
    /// Stop here instead of at the last snapshot.
    pub t_stop: Option<f64>,
}

impl Default for AdvectOptions {
    fn default() -> Self {
        Self {
            max_order: 2,
            substeps: 2,
            t_stop: None,
        }
    }
}

/// Integrates characteristics from each seed through the whole trajectory.
pub fn advect(traj: &Trajectory, seeds: &[f64]) -> Result<Vec<CharPath>> {
    advect_with(&FieldHistory::new(traj), seeds, AdvectOptions::default())
}

pub fn advect_with(history: &FieldHistory<'_>, seeds: &[f64], opts: AdvectOptions) -> Result<Vec<CharPath>> {
    if opts.max_order > MAX_TRACKED_ORDER || opts.substeps == 0 {
        return domain("advect: max_order must be <= 4 and substeps >= 1");
    }
    seeds.par_iter().map(|&x0| advect_one(history, x0, opts)).collect()
}

fn advect_one(history: &FieldHistory<'_>, x0: f64, opts: AdvectOptions) -> Result<CharPath> {
    let snaps = &history.trajectory().snapshots;
    let (t_first, t_last) = history.trajectory().t_range();
    let t_stop = opts.t_stop.unwrap_or(t_last);
    let truncated = t_stop > t_last;
    let t_stop = t_stop.min(t_last);

    let mut path = CharPath {
        x0,
        times: Vec::new(),
        positions: Vec::new(),
        vn_samples: (0..=opts.max_order).map(|n| (n, Vec::new())).collect(),
        truncated,
    };
    let push = |path: &mut CharPath, t: f64, x: f64, snapshot: Option<usize>| -> Result<()> {
        path.times.push(t);
        path.positions.push(x);
        for (n, v) in path.vn_samples.iter_mut() {
            v.push(match snapshot {
                Some(i) => history.derivative_at_snapshot(i, *n, x)?,
                None => history.derivative(*n, x, t)?,
            });
        }
        Ok(())
    };

    let mut x = x0;
    push(&mut path, t_first, x, Some(0))?;
    for i in 0..snaps.len() - 1 {
        let (ta, tb) = (snaps[i].t(), snaps[i + 1].t());
        if ta >= t_stop {
            break;
        }
        let end = tb.min(t_stop);
        let h = (end - ta) / opts.substeps as f64;
        let mut t = ta;
        for k in 0..opts.substeps {
            x = history.rk4(x, t, h)?;
            t = if k + 1 == opts.substeps { end } else { ta + (k + 1) as f64 * h };
        }
        push(&mut path, end, x, (end == tb).then_some(i + 1))?;
    }
    Ok(path)
}

// ---------------------------------------------------------------------------
// Slope series.

/// `m(t) = inf_x u_x`, its location and `q(t) = m(0)/m(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeSeries {
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    pub argmin_x: Vec<f64>,
    pub q: Vec<f64>,
    /// Per-path `r(t) = m(0)/v_1(t; x0)` when attached.
    pub r: Option<Vec<f64>>,
    /// Some sample had `m >= 0`.
    pub degenerate: bool,
}

impl SlopeSeries {
    fn from_samples(times: Vec<f64>, m: Vec<f64>, argmin_x: Vec<f64>) -> Self {
        let m0 = m[0];
        let q = m.iter().map(|&mi| m0 / mi).collect();
        let degenerate = m.iter().any(|&mi| mi >= 0.0);
        Self {
            times,
            m,
            argmin_x,
            q,
            r: None,
            degenerate,
        }
    }

    pub fn m0(&self) -> f64 {
        self.m[0]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The first `n` samples.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            times: self.times[..n].to_vec(),
            m: self.m[..n].to_vec(),
            argmin_x: self.argmin_x[..n].to_vec(),
            q: self.q[..n].to_vec(),
            r: self.r.as_ref().map(|r| r[..n.min(r.len())].to_vec()),
            degenerate: self.degenerate,
        }
    }

    /// Attaches `r(t) = m(0)/v_1(t; x0)` of a path sampled at the same times.
    pub fn with_r(&self, path: &CharPath) -> Result<Self> {
        let v1 = path.v(1).ok_or_else(|| Error::Domain("path carries no v_1 samples".into()))?;
        if path.times.len() < self.len() || path.times[..self.len()] != self.times[..] {
            return domain("path and slope series are sampled at different times");
        }
        let mut out = self.clone();
        out.r = Some(v1[..self.len()].iter().map(|v| self.m0() / v).collect());
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "m", "argmin_x", "q", "r"])?;
        for i in 0..self.len() {
            let r = self.r.as_ref().map(|r| r[i].to_string()).unwrap_or_default();
            w.write_record([
                self.times[i].to_string(),
                self.m[i].to_string(),
                self.argmin_x[i].to_string(),
                self.q[i].to_string(),
                r,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Slope series at the stored snapshots, refined below grid resolution.
pub fn slope_series(traj: &Trajectory) -> Result<SlopeSeries> {
    let mut times = Vec::with_capacity(traj.snapshots.len());
    let mut m = Vec::with_capacity(traj.snapshots.len());
    let mut argmin = Vec::with_capacity(traj.snapshots.len());
    for s in &traj.snapshots {
        let (x, v) = spectral_derivative(&s.state.u, 1)?.min_refined();
        times.push(s.t());
        m.push(v);
        argmin.push(x);
    }
    Ok(SlopeSeries::from_samples(times, m, argmin))
}

/// Slope series on the adaptive step grid, from the per-step records.
pub fn slope_series_dense(traj: &Trajectory) -> SlopeSeries {
    SlopeSeries::from_samples(
        traj.records.iter().map(|r| r.t).collect(),
        traj.records.iter().map(|r| r.min_slope).collect(),
        traj.records.iter().map(|r| r.argmin_x).collect(),
    )
}

// ---------------------------------------------------------------------------
// Characteristic ODE residuals.

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub n: usize,
    pub h: f64,
    pub times: Vec<f64>,
    /// `dv_n/dt + sum_j C(n, j) v_j v_{n+1-j} + K_n`.
    pub residual: Vec<f64>,
    /// Largest magnitude among the three terms.
    pub scale: Vec<f64>,
}

impl ResidualSeries {
    pub fn max_relative(&self) -> f64 {
        self.residual
            .iter()
            .zip(&self.scale)
            .map(|(r, s)| if *s > 0.0 { r.abs() / s } else { r.abs() })
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Residual of the `n`-th characteristic equation at the path's snapshot
/// times, with `dv_n/dt` from a centered difference of half-width `h`.
///
/// Samples whose stencil leaves the stored range are skipped.
pub fn residual_vn(history: &FieldHistory<'_>, path: &CharPath, n: usize, h: f64) -> Result<ResidualSeries> {
    if n + 1 > MAX_TRACKED_ORDER || !(h > 0.0) {
        return domain(format!("residual_vn needs n <= {} and h > 0", MAX_TRACKED_ORDER - 1));
    }
    let traj = history.trajectory();
    let (t_first, t_last) = traj.t_range();
    let mut out = ResidualSeries {
        n,
        h,
        times: Vec::new(),
        residual: Vec::new(),
        scale: Vec::new(),
    };
    for (t, x) in path.times.iter().zip(&path.positions) {
        let (t, x) = (*t, *x);
        if t - h < t_first || t + h > t_last {
            continue;
        }
        let Some(i) = traj.snapshots.iter().position(|s| s.t() == t) else {
            continue;
        };
        let xp = history.rk4(x, t, h)?;
        let xm = history.rk4(x, t, -h)?;
        let dv = (history.derivative(n, xp, t + h)? - history.derivative(n, xm, t - h)?) / (2.0 * h);
        let v: Vec<f64> = (0..=n.max(1))
            .map(|j| history.derivative_at_snapshot(i, j, x))
            .collect::<Result<_>>()?;
        let quad: f64 = (1..=n).map(|j| binomial(n, j) * v[j] * v[n + 1 - j]).sum();
        let k = history.kernel_at_snapshot(i, n, x)?;
        out.times.push(t);
        out.residual.push(dv + quad + k);
        out.scale.push(dv.abs().max(quad.abs()).max(k.abs()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Breaking verdicts.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Breaking,
    NoBreakingByTEnd,
    UnderResolved,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakingOptions {
    /// Allowed growth of `sup |u|` over its initial value.
    pub sup_factor: f64,
    /// Fraction of the samples used by the main fit.
    pub fit_fraction: f64,
    /// Fraction used by the robustness refit.
    pub refit_fraction: f64,
    /// Largest relative disagreement between the two fits.
    pub fit_tolerance: f64,
    /// Largest relative disagreement between refinement levels.
    pub refinement_tolerance: f64,
}

impl Default for BreakingOptions {
    fn default() -> Self {
        Self {
            sup_factor: 2.0,
            fit_fraction: 0.3,
            refit_fraction: 0.15,
            fit_tolerance: 0.03,
            refinement_tolerance: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementAgreement {
    pub crossing_coarse: f64,
    pub crossing_fine: f64,
    pub relative_difference: f64,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakingReport {
    pub verdict: Verdict,
    pub run_end: RunEnd,
    /// Root of the linear fit of `1/m(t)`.
    pub t_est: Option<f64>,
    pub t_lower: f64,
    pub t_upper: f64,
    /// `t_lower <= t_est <= t_upper`; evaluated, never assumed.
    pub bracket_pass: Option<bool>,
    pub m0: f64,
    pub m_final: f64,
    pub sup_u0: f64,
    pub sup_u_max: f64,
    /// Coefficient of determination of the main fit.
    pub fit_quality: Option<f64>,
    /// Fitted slope of `1/m` against `t`; close to 1 when the Riccati term dominates.
    pub fit_slope: Option<f64>,
    pub fit_disagreement: Option<f64>,
    pub monotone_tail: bool,
    /// Time at which `m` crossed `slope_stop`, interpolated in `1/m`.
    pub crossing_time: Option<f64>,
    pub final_points: usize,
    pub refinement: Option<RefinementAgreement>,
    pub eps: f64,
}

/// Open bracket `(-1/(m0 (1+eps)), -1/(m0 (1-eps)^2))` for the breaking time.
pub fn breaking_bracket(m0: f64, eps: f64) -> (f64, f64) {
    (-1.0 / (m0 * (1.0 + eps)), -1.0 / (m0 * (1.0 - eps).powi(2)))
}

struct LineFit {
    intercept: f64,
    slope: f64,
    r2: f64,
}

fn fit_line(t: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = t.len() as f64;
    if t.len() < 3 {
        return None;
    }
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|a| (a - tm).powi(2)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    if stt == 0.0 {
        return None;
    }
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let ss_tot: f64 = y.iter().map(|b| (b - ym).powi(2)).sum();
    let ss_res: f64 = t.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Some(LineFit {
        intercept,
        slope,
        r2: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
    })
}

/// Root of a line fitted to `1/m` over the last `fraction` of the samples.
fn fit_root(series: &SlopeSeries, fraction: f64) -> Option<(f64, LineFit, usize)> {
    let n = series.len();
    let take = ((n as f64 * fraction).ceil() as usize).max(3).min(n);
    let start = n - take;
    let steep: Vec<usize> = (start..n).filter(|&i| series.m[i] < 5.0 * series.m0()).collect();
    let idx: Vec<usize> = if steep.len() >= 5 { steep } else { (start..n).collect() };
    let t: Vec<f64> = idx.iter().map(|&i| series.times[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| 1.0 / series.m[i]).collect();
    let fit = fit_line(&t, &y)?;
    if fit.slope <= 0.0 {
        return None;
    }
    Some((-fit.intercept / fit.slope, fit, idx[0]))
}

/// Time at which `m` first drops below `level`, linear in `1/m` between steps.
pub fn crossing_time(series: &SlopeSeries, level: f64) -> Option<f64> {
    let i = series.m.iter().position(|&m| m < level)?;
    if i == 0 {
        return Some(series.times[0]);
    }
    let (ya, yb) = (1.0 / series.m[i - 1], 1.0 / series.m[i]);
    let (ta, tb) = (series.times[i - 1], series.times[i]);
    Some(ta + (1.0 / level - ya) / (yb - ya) * (tb - ta))
}

/// Classifies a finished run. The verdict is provisional until refinement
/// agreement is attached by [`detect_with_refinement`].
pub fn breaking_detect(traj: &Trajectory, eps: f64) -> Result<BreakingReport> {
    breaking_detect_with(traj, eps, BreakingOptions::default())
}

pub fn breaking_detect_with(traj: &Trajectory, eps: f64, opts: BreakingOptions) -> Result<BreakingReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("eps must lie in (0, 1), got {eps}"));
    }
    let series = slope_series_dense(traj);
    let m0 = series.m0();
    let (t_lower, t_upper) = breaking_bracket(m0, eps);
    let sup_u0 = traj.records[0].sup_abs_u;
    let sup_u_max = traj.records.iter().map(|r| r.sup_abs_u).fold(0.0, f64::max);

    let main = if m0 < 0.0 { fit_root(&series, opts.fit_fraction) } else { None };
    let refit = if m0 < 0.0 { fit_root(&series, opts.refit_fraction) } else { None };
    let disagreement = match (&main, &refit) {
        (Some((a, ..)), Some((b, ..))) => Some((a - b).abs() / a.abs()),
        _ => None,
    };
    let monotone_tail = match &main {
        Some((_, _, start)) => series.m[*start..].windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs()),
        None => false,
    };
    let t_est = main.as_ref().map(|(t, ..)| *t);
    let robust = disagreement.is_some_and(|d| d < opts.fit_tolerance);
    let bounded = sup_u_max.is_finite() && sup_u_max < opts.sup_factor * sup_u0;

    let verdict = match traj.end {
        RunEnd::SlopeStop if monotone_tail && robust && bounded => Verdict::Breaking,
        RunEnd::TEnd => Verdict::NoBreakingByTEnd,
        _ => Verdict::UnderResolved,
    };
    Ok(BreakingReport {
        verdict,
        run_end: traj.end,
        t_est,
        t_lower,
        t_upper,
        bracket_pass: t_est.map(|t| t_lower <= t && t <= t_upper),
        m0,
        m_final: *series.m.last().expect("records are never empty"),
        sup_u0,
        sup_u_max,
        fit_quality: main.as_ref().map(|(_, f, _)| f.r2),
        fit_slope: main.as_ref().map(|(_, f, _)| f.slope),
        fit_disagreement: disagreement,
        monotone_tail,
        crossing_time: crossing_time(&series, traj.config.slope_stop),
        final_points: traj.last().state.u.n_points(),
        refinement: None,
        eps,
    })
}

/// The same problem on a grid twice as fine, with a tighter refinement trigger.
pub fn refined_config(config: &SolverConfig) -> SolverConfig {
    let mut fine = config.clone();
    fine.n_points *= 2;
    fine.max_points = (config.max_points * 2).min(crate::solver::MAX_GRID_POINTS).max(fine.n_points);
    fine.refine_threshold = (config.refine_threshold * 1e-2).max(1e-30);
    fine.dt_initial = config.dt_initial / 2.0;
    fine
}

/// Result of a run and its refined twin.
pub struct RefinedRun {
    pub coarse: Trajectory,
    pub fine: Trajectory,
    pub report: BreakingReport,
}

/// Runs `u0` at two resolutions and demotes a breaking verdict whose
/// crossing time is not stable under refinement.
pub fn detect_with_refinement(
    config: &SolverConfig,
    u0: &GridFunction,
    eps: f64,
    opts: BreakingOptions,
) -> Result<RefinedRun> {
    let fine_config = refined_config(config);
    let u_fine = u0.padded(fine_config.n_points)?;
    let (coarse, fine) = rayon::join(|| run(config, u0.clone()), || run(&fine_config, u_fine));
    let (coarse, fine) = (coarse?, fine?);
    let mut report = breaking_detect_with(&coarse, eps, opts)?;
    let fine_report = breaking_detect_with(&fine, eps, opts)?;
    if let (Some(a), Some(b)) = (report.crossing_time, fine_report.crossing_time) {
        let d = (a - b).abs() / b.abs();
        report.refinement = Some(RefinementAgreement {
            crossing_coarse: a,
            crossing_fine: b,
            relative_difference: d,
            stable: d < opts.refinement_tolerance,
        });
    }
    if report.verdict == Verdict::Breaking
        && (fine_report.verdict != Verdict::Breaking || !report.refinement.is_some_and(|r| r.stable))
    {
        report.verdict = Verdict::UnderResolved;
    }
    Ok(RefinedRun { coarse, fine, report })
}

// ---------------------------------------------------------------------------
// Lemma-level diagnostics.

/// Per-snapshot test of `sup_x |K_1| <= eps^2 m(t)^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct K1Window {
    pub times: Vec<f64>,
    pub k1_sup: Vec<f64>,
    pub threshold: Vec<f64>,
    /// Number of leading snapshots on which the condition holds.
    pub valid_prefix: usize,
}

impl K1Window {
    pub fn t_end(&self) -> Option<f64> {
        self.valid_prefix.checked_sub(1).map(|i| self.times[i])
    }
}

pub fn k1_small_window(traj: &Trajectory, slope: &SlopeSeries, eps: f64) -> Result<K1Window> {
    let physics = traj.physics();
    let mut w = K1Window {
        times: slope.times.clone(),
        k1_sup: Vec::with_capacity(slope.len()),
        threshold: Vec::with_capacity(slope.len()),
        valid_prefix: 0,
    };
    let mut prefix = true;
    for (s, m) in traj.snapshots.iter().zip(&slope.m) {
        let k1 = if physics.dispersion {
            dispersion_apply(&spectral_derivative(&s.state.u, 1)?, physics.alpha)?.sup_refined().1
        } else {
            0.0
        };
        let thr = eps * eps * m * m;
        prefix &= k1 <= thr;
        if prefix {
            w.valid_prefix += 1;
        }
        w.k1_sup.push(k1);
        w.threshold.push(thr);
    }
    Ok(w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCheck {
    pub holds: bool,
    /// Largest relative increase between consecutive samples.
    pub worst_increase: f64,
}

/// `q` non-increasing on the first `n` samples (0 < q <= 1 follows).
pub fn q_monotonicity(slope: &SlopeSeries, n: usize) -> MonotonicityCheck {
    let q = &slope.q[..n.min(slope.len())];
    let worst = q.windows(2).map(|w| (w[1] - w[0]) / w[0]).fold(f64::NEG_INFINITY, f64::max);
    MonotonicityCheck {
        holds: q.iter().all(|&v| v > 0.0 && v <= 1.0 + 1e-12) && worst <= 1e-9,
        worst_increase: worst.max(0.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaDiagnostic {
    pub t1: f64,
    pub t2: f64,
    pub nested: bool,
    /// Fraction of labels in the later set but not the earlier one.
    pub violation_measure: f64,
    pub size_t1: usize,
    pub size_t2: usize,
    /// `[t1, t2]` lies inside the verified `|K_1| <= eps^2 m^2` window.
    pub k1_small: bool,
}

/// Label sets `{x0 : v_1(t; x0) <= (1 - eps) m(t)}` at two sampled times.
pub fn sigma_sets(
    paths: &[CharPath],
    slope: &SlopeSeries,
    eps: f64,
    i1: usize,
    i2: usize,
) -> Result<(Vec<bool>, Vec<bool>)> {
    let member = |i: usize| -> Result<Vec<bool>> {
        paths
            .iter()
            .map(|p| {
                let v1 = p.v(1).ok_or_else(|| Error::Domain("paths carry no v_1 samples".into()))?;
                Ok(v1[i] <= (1.0 - eps) * slope.m[i])
            })
            .collect()
    };
    Ok((member(i1)?, member(i2)?))
}

fn nearest_index(times: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (i, &ti) in times.iter().enumerate() {
        if (ti - t).abs() < (times[best] - t).abs() {
            best = i;
        }
    }
    best
}

/// Checks `Sigma(t2) subset Sigma(t1)` in Lagrangian labels; the requested
/// times snap to the nearest stored snapshots.
pub fn sigma_set_diagnostic(traj: &Trajectory, eps: f64, t1: f64, t2: f64) -> Result<SigmaDiagnostic> {
    if t1 > t2 {
        return domain(format!("sigma diagnostic needs t1 <= t2, got {t1} > {t2}"));
    }
    let slope = slope_series(traj)?;
    let (i1, i2) = (nearest_index(&slope.times, t1), nearest_index(&slope.times, t2));
    let u0 = &traj.first().state.u;
    let stride = (u0.n_points() / 1024).max(1);
    let seeds: Vec<f64> = (0..u0.n_points()).step_by(stride).map(|j| u0.node(j)).collect();
    let history = FieldHistory::new(traj);
    let opts = AdvectOptions {
        max_order: 1,
        substeps: 2,
        t_stop: Some(slope.times[i2]),
    };
    let paths = advect_with(&history, &seeds, opts)?;
    let window = k1_small_window(traj, &slope.truncated(i2 + 1), eps)?;
    sigma_from_paths(&paths, &slope, eps, i1, i2, window.valid_prefix > i2)
}

pub fn sigma_from_paths(
    paths: &[CharPath],
    slope: &SlopeSeries,
    eps: f64,
    i1: usize,
    i2: usize,
    k1_small: bool,
) -> Result<SigmaDiagnostic> {
    let (s1, s2) = sigma_sets(paths, slope, eps, i1, i2)?;
    let violations = s1.iter().zip(&s2).filter(|(a, b)| **b && !**a).count();
    Ok(SigmaDiagnostic {
        t1: slope.times[i1],
        t2: slope.times[i2],
        nested: violations == 0,
        violation_measure: violations as f64 / paths.len().max(1) as f64,
        size_t1: s1.iter().filter(|b| **b).count(),
        size_t2: s2.iter().filter(|b| **b).count(),
        k1_small,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub x0: f64,
    /// `q <= r <= q/(1 - eps)` on every checked sample.
    pub qr_holds: bool,
    /// `(1 + eps) m0 <= dr/dt <= (1 - eps) m0` on every checked interval.
    pub dr_holds: bool,
    pub worst_qr_margin: f64,
    pub worst_dr_margin: f64,
    pub samples: usize,
}

/// The `q`/`r` sandwich and the `dr/dt` bracket for one path on the first
/// `n` samples. Meaningful for paths whose label stays in `Sigma`.
pub fn sandwich_check(slope: &SlopeSeries, path: &CharPath, eps: f64, n: usize) -> Result<SandwichCheck> {
    let with_r = slope.with_r(path)?;
    let r = with_r.r.as_ref().expect("r was just attached");
    let n = n.min(slope.len());
    let m0 = slope.m0();
    let tol = 1e-9;
    let mut qr = f64::INFINITY;
    for i in 0..n {
        let (q, ri) = (slope.q[i], r[i]);
        qr = qr.min((ri - q) / q).min((q / (1.0 - eps) - ri) / q);
    }
    let mut dr = f64::INFINITY;
    for i in 1..n {
        let rate = (r[i] - r[i - 1]) / (slope.times[i] - slope.times[i - 1]);
        let lo = (1.0 + eps) * m0;
        let hi = (1.0 - eps) * m0;
        dr = dr.min((rate - lo) / m0.abs()).min((hi - rate) / m0.abs());
    }
    Ok(SandwichCheck {
        x0: path.x0,
        qr_holds: qr >= -tol,
        dr_holds: n < 2 || dr >= -1e-6,
        worst_qr_margin: qr,
        worst_dr_margin: dr,
        samples: n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QIntegralCheck {
    pub s: f64,
    /// `int_0^t q^{-s}` at the last sample, by the trapezoid rule.
    pub lhs: f64,
    pub rhs: f64,
    /// The inequality held at every sample.
    pub holds: bool,
    /// Largest `lhs / rhs` over the samples.
    pub worst_ratio: f64,
}

/// Closed-form upper bound for `int_0^t q^{-s}` given `q(t)`.
pub fn q_integral_rhs(m0: f64, eps: f64, s: f64, q: f64) -> f64 {
    let a = 1.0 - eps;
    if (s - 1.0).abs() < 1e-12 {
        -(1.0 / (a * a * m0)) * ((1.0 / a).ln() - q.ln())
    } else {
        -(1.0 / (a.powf(s + 1.0) * m0)) * (1.0 / (1.0 - s)) * (a.powf(s - 1.0) - q.powf(1.0 - s))
    }
}

pub fn q_integral_bounds(slope: &SlopeSeries, eps: f64, s: f64) -> Result<QIntegralCheck> {
    if !(s > 0.0) || !(eps > 0.0 && eps < 1.0) {
        return domain("q_integral_bounds needs s > 0 and eps in (0, 1)");
    }
    if slope.q.iter().any(|&q| !(q > 0.0)) {
        return domain("q must stay positive");
    }
    let m0 = slope.m0();
    let mut lhs = 0.0;
    let mut holds = true;
    let mut worst = 0.0_f64;
    let mut rhs = q_integral_rhs(m0, eps, s, slope.q[0]);
    for i in 0..slope.len() {
        if i > 0 {
            let dt = slope.times[i] - slope.times[i - 1];
            lhs += 0.5 * dt * (slope.q[i - 1].powf(-s) + slope.q[i].powf(-s));
        }
        rhs = q_integral_rhs(m0, eps, s, slope.q[i]);
        holds &= lhs <= rhs * (1.0 + 1e-6);
        worst = worst.max(lhs / rhs);
    }
    Ok(QIntegralCheck {
        s,
        lhs,
        rhs,
        holds,
        worst_ratio: worst,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UxxBoundCheck {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub bounds: Vec<f64>,
    pub holds: bool,
}

/// `||u_xx(t)|| <= ||phi''|| ((1 - eps) q(t))^{-5/(2 (1 - eps)^2)}` at the
/// snapshots of `slope` (which must come from [`slope_series`]).
pub fn uxx_bound_check(traj: &Trajectory, slope: &SlopeSeries, eps: f64) -> Result<UxxBoundCheck> {
    let p = 5.0 / (2.0 * (1.0 - eps).powi(2));
    let phi2 = traj.first().state.u.derivative_l2_norm(2);
    let mut out = UxxBoundCheck {
        times: Vec::new(),
        norms: Vec::new(),
        bounds: Vec::new(),
        holds: true,
    };
    for (s, q) in traj.snapshots.iter().zip(&slope.q) {
        let norm = s.state.u.derivative_l2_norm(2);
        let bound = phi2 * ((1.0 - eps) * q).powf(-p);
        out.holds &= norm <= bound * (1.0 + 1e-9);
        out.times.push(s.t());
        out.norms.push(norm);
        out.bounds.push(bound);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolverConfig;
    use crate::spectral::Alpha;
    use std::f64::consts::PI;

    fn burgers(n: usize, t_end: f64, slope_stop: f64) -> Trajectory {
        let mut c = SolverConfig::new(Alpha::new(1.0).unwrap(), 2.0 * PI, n, 2e-3, t_end);
        c.dispersion = false;
        c.cfl_safety = 0.25;
        c.slope_stop = slope_stop;
        c.refine_threshold = 1e-20;
        run(&c, GridFunction::from_fn(2.0 * PI, n, |x| -x.sin()).unwrap()).unwrap()
    }

    #[test]
    fn constant_field_moves_paths_linearly() {
        let mut c = SolverConfig::new(Alpha::new(0.5).unwrap(), 2.0 * PI, 32, 1e-2, 0.5);
        c.nonlinear = false;
        let traj = run(&c, GridFunction::from_fn(2.0 * PI, 32, |_| 0.7).unwrap()).unwrap();
        let paths = advect(&traj, &[0.0, 1.3]).unwrap();
        for p in paths {
            let t = *p.times.last().unwrap();
            assert!((p.positions.last().unwrap() - (p.x0 + 0.7 * t)).abs() < 1e-10);
        }
    }

    #[test]
    fn stagnation_point_stays_put() {
        let traj = burgers(128, 0.5, -1e3);
        let p = &advect(&traj, &[PI]).unwrap()[0];
        assert!(p.positions.iter().all(|x| (x - PI).abs() < 1e-8));
    }

    #[test]
    fn slope_of_scaled_sine() {
        let u = GridFunction::from_fn(2.0 * PI, 64, |x| -2.5 * x.sin()).unwrap();
        let (x, m) = spectral_derivative(&u, 1).unwrap().min_refined();
        assert!((m + 2.5).abs() < 1e-10 && x.abs() < 1e-6);
    }

    #[test]
    fn bracket_arithmetic() {
        let (lo, hi) = breaking_bracket(-1.0, 0.1);
        assert!((lo - 1.0 / 1.1).abs() < 1e-15 && (hi - 1.0 / 0.81).abs() < 1e-15);
        assert!(lo < hi);
    }

    #[test]
    fn crossing_time_interpolates_reciprocal() {
        let s = SlopeSeries::from_samples(vec![0.0, 0.5, 0.9], vec![-1.0, -2.0, -10.0], vec![0.0; 3]);
        // 1/m = -1 + t is exact, so the crossing of -5 is at t = 0.8
        assert!((crossing_time(&s, -5.0).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_field_has_zero_residual() {
        let c = SolverConfig::new(Alpha::new(0.3).unwrap(), 2.0 * PI, 32, 1e-2, 0.1);
        let traj = run(&c, GridFunction::zeros(2.0 * PI, 32).unwrap()).unwrap();
        let h = FieldHistory::new(&traj);
        let p = &advect_with(&h, &[1.0], AdvectOptions::default()).unwrap()[0];
        for n in 0..=2 {
            assert_eq!(residual_vn(&h, p, n, 1e-3).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn q_integral_holds_at_start() {
        let s = SlopeSeries::from_samples(vec![0.0], vec![-1.0], vec![0.0]);
        for sv in [0.5, 1.0, 2.0] {
            let c = q_integral_bounds(&s, 0.1, sv).unwrap();
            assert!(c.holds && c.lhs == 0.0 && c.rhs > 0.0);
        }
    }

    #[test]
    fn sigma_sets_nest_trivially_at_equal_times() {
        let traj = burgers(128, 0.3, -1e3);
        let d = sigma_set_diagnostic(&traj, 0.1, 0.2, 0.2).unwrap();
        assert!(d.nested && d.size_t1 > 0 && d.k1_small);
    }
}
