//! Time integration of `u_t + H Lambda^alpha u + u u_x = 0` on the torus.
//!
//! The linear part is integrated exactly by fourth-order exponential time
//! differencing (Cox-Matthews); the quadratic term is formed pseudospectrally
//! as `-(u^2)_x / 2`. Runs adapt the step to the current state only, so a run
//! resumed from a checkpoint reproduces the uninterrupted run bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    dispersion_symbol, fft_forward_in_place, fft_inverse_in_place, signed_mode, spectral_derivative, symmetrize,
    Alpha, GridFunction,
};

/// Hard cap on the grid size reachable by auto-refinement.
pub const MAX_GRID_POINTS: usize = 1 << 20;

/// Which terms of the equation are active.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub alpha: Alpha,
    pub dispersion: bool,
    pub nonlinear: bool,
    pub dealias: bool,
}

impl Physics {
    pub fn full(alpha: Alpha) -> Self {
        Self {
            alpha,
            dispersion: true,
            nonlinear: true,
            dealias: true,
        }
    }

    /// Inviscid Burgers: dispersion switched off.
    pub fn burgers() -> Self {
        Self {
            alpha: Alpha::new(1.0).expect("1 is a valid exponent"),
            dispersion: false,
            nonlinear: true,
            dealias: true,
        }
    }

    pub fn linear(alpha: Alpha) -> Self {
        Self {
            alpha,
            dispersion: true,
            nonlinear: false,
            dealias: true,
        }
    }
}

fn default_length() -> f64 {
    2.0 * std::f64::consts::PI
}
fn default_points() -> usize {
    256
}
fn default_dt() -> f64 {
    1e-3
}
fn default_t_end() -> f64 {
    1.0
}
fn default_cfl() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_slope_stop() -> f64 {
    -1e3
}
fn default_max_points() -> usize {
    1 << 16
}
fn default_refine_threshold() -> f64 {
    1e-8
}
fn default_snapshot_every() -> usize {
    1
}
fn default_max_steps() -> u64 {
    1_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub alpha: Alpha,
    #[serde(default = "default_length")]
    pub domain_length: f64,
    #[serde(default = "default_points")]
    pub n_points: usize,
    #[serde(default = "default_dt")]
    pub dt_initial: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_true")]
    pub dealias: bool,
    #[serde(default = "default_slope_stop")]
    pub slope_stop: f64,
    /// Steps between checkpoints; 0 disables them.
    #[serde(default)]
    pub checkpoint_every: u64,
    #[serde(default = "default_true")]
    pub dispersion: bool,
    #[serde(default = "default_true")]
    pub nonlinear: bool,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
    /// High-band energy fraction that triggers a grid doubling.
    #[serde(default = "default_refine_threshold")]
    pub refine_threshold: f64,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
}

impl SolverConfig {
    /// Full equation with defaults for everything but the grid and timing.
    pub fn new(alpha: Alpha, domain_length: f64, n_points: usize, dt_initial: f64, t_end: f64) -> Self {
        Self {
            alpha,
            domain_length,
            n_points,
            dt_initial,
            t_end,
            cfl_safety: default_cfl(),
            dealias: true,
            slope_stop: default_slope_stop(),
            checkpoint_every: 0,
            dispersion: true,
            nonlinear: true,
            max_points: default_max_points(),
            refine_threshold: default_refine_threshold(),
            snapshot_every: 1,
            max_steps: default_max_steps(),
        }
    }

    pub fn physics(&self) -> Physics {
        Physics {
            alpha: self.alpha,
            dispersion: self.dispersion,
            nonlinear: self.nonlinear,
            dealias: self.dealias,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.domain_length.is_finite() && self.domain_length > 0.0) {
            return bad(format!("domain_length must be positive, got {}", self.domain_length));
        }
        if self.n_points < crate::spectral::MIN_POINTS || !self.n_points.is_power_of_two() {
            return bad(format!("n_points must be a power of two >= 16, got {}", self.n_points));
        }
        if !(self.max_points.is_power_of_two() && self.max_points >= self.n_points && self.max_points <= MAX_GRID_POINTS) {
            return bad(format!(
                "max_points must be a power of two in [n_points, 2^20], got {}",
                self.max_points
            ));
        }
        let dx = self.domain_length / self.n_points as f64;
        if !(self.dt_initial > 0.0 && self.dt_initial < dx) {
            return bad(format!("dt_initial must lie in (0, dx = {dx:.3e}), got {}", self.dt_initial));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if !(self.slope_stop < 0.0) {
            return bad(format!("slope_stop must be negative, got {}", self.slope_stop));
        }
        if !(self.refine_threshold > 0.0 && self.refine_threshold < 1.0) {
            return bad(format!("refine_threshold must lie in (0, 1), got {}", self.refine_threshold));
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1".into());
        }
        Ok(())
    }
}

/// Solution at one instant together with the reference values used for drift.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub u: GridFunction,
    pub t: f64,
    pub step_count: u64,
    pub l2_initial: f64,
    pub mean_initial: f64,
}

impl SolverState {
    pub fn initial(u: GridFunction) -> Self {
        let l2_initial = u.l2_norm();
        let mean_initial = u.mean();
        Self {
            u,
            t: 0.0,
            step_count: 0,
            l2_initial,
            mean_initial,
        }
    }

    fn advanced(&self, u: GridFunction, t: f64) -> Self {
        Self {
            u,
            t,
            step_count: self.step_count + 1,
            l2_initial: self.l2_initial,
            mean_initial: self.mean_initial,
        }
    }
}

/// A stored state plus its time derivative, for Hermite interpolation in time.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub state: SolverState,
    pub dudt: GridFunction,
}

impl Snapshot {
    pub fn t(&self) -> f64 {
        self.state.t
    }
}

/// Per-step scalar diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub min_slope: f64,
    pub argmin_x: f64,
    pub sup_abs_u: f64,
    pub l2: f64,
    pub mean: f64,
    pub n_points: usize,
    pub high_band: f64,
}

impl StepRecord {
    fn measure(u: &GridFunction, t: f64, dt: f64, dealias: bool) -> Result<Self> {
        let ux = spectral_derivative(u, 1)?;
        let (argmin_x, min_slope) = ux.min_refined();
        Ok(Self {
            t,
            dt,
            min_slope,
            argmin_x,
            sup_abs_u: u.sup_refined().1,
            l2: u.l2_norm(),
            mean: u.mean(),
            n_points: u.n_points(),
            high_band: u.high_band_fraction(dealias),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunEnd {
    /// Reached `t_end`.
    TEnd,
    /// The minimum slope fell below `slope_stop`.
    SlopeStop,
    /// Refinement would exceed `max_points`.
    ResolutionExhausted,
    /// A step produced non-finite values.
    NonFinite,
    MaxSteps,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub snapshots: Vec<Snapshot>,
    pub records: Vec<StepRecord>,
    pub end: RunEnd,
}

impl Trajectory {
    pub fn physics(&self) -> Physics {
        self.config.physics()
    }

    /// The adaptive time grid.
    pub fn dense_times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("a trajectory holds at least the initial snapshot")
    }

    pub fn first(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.first().t(), self.last().t())
    }

    /// Index `i` with `snapshots[i].t <= t <= snapshots[i + 1].t`.
    pub fn bracket(&self, t: f64) -> Option<usize> {
        let (t0, t1) = self.t_range();
        if !(t >= t0 && t <= t1) || self.snapshots.len() < 2 {
            return None;
        }
        let i = self.snapshots.partition_point(|s| s.t() <= t);
        Some(i.saturating_sub(1).min(self.snapshots.len() - 2))
    }

    /// Writes `t, min_slope, sup_abs_u, l2` for every step.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            t: f64,
            min_slope: f64,
            sup_abs_u: f64,
            l2: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(Row {
                t: r.t,
                min_slope: r.min_slope,
                sup_abs_u: r.sup_abs_u,
                l2: r.l2,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes `x, u` for one field.
pub fn write_field_csv<W: Write>(u: &GridFunction, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "u"])?;
    for (j, v) in u.values().iter().enumerate() {
        w.write_record([u.node(j).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Spectral right-hand side and the exponential integrator.

/// `phi_1, phi_2, phi_3` at `z`.
fn phi_functions(z: Complex64) -> [Complex64; 3] {
    if z.norm() < 1.0 {
        // phi_k(z) = sum_j z^j / (j + k)!
        let mut out = [Complex64::new(0.0, 0.0); 3];
        let mut zj = Complex64::new(1.0, 0.0);
        let mut inv_fact = [1.0, 0.5, 1.0 / 6.0];
        for j in 0..24 {
            for (k, o) in out.iter_mut().enumerate() {
                *o += zj * inv_fact[k];
            }
            zj *= z;
            for (k, f) in inv_fact.iter_mut().enumerate() {
                *f /= (j + k + 2) as f64;
            }
        }
        out
    } else {
        let p1 = (z.exp() - 1.0) / z;
        let p2 = (p1 - 1.0) / z;
        let p3 = (p2 - 0.5) / z;
        [p1, p2, p3]
    }
}

#[derive(Clone, Debug)]
struct EtdCoeffs {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    b1: Vec<Complex64>,
    b2: Vec<Complex64>,
    b4: Vec<Complex64>,
}

/// Per-grid operator tables and the memoized integrator weights.
struct Workspace {
    n: usize,
    domain_length: f64,
    physics: Physics,
    linear: Vec<Complex64>,
    input_mask: Vec<f64>,
    nonlinear_symbol: Vec<Complex64>,
    memo: Option<(f64, EtdCoeffs)>,
}

impl Workspace {
    fn new(domain_length: f64, n: usize, physics: Physics) -> Self {
        let a = physics.alpha.value();
        let cutoff = n / 3;
        let mut linear = Vec::with_capacity(n);
        let mut input_mask = Vec::with_capacity(n);
        let mut nonlinear_symbol = Vec::with_capacity(n);
        for j in 0..n {
            let k = signed_mode(j, n);
            let xi = 2.0 * std::f64::consts::PI * k as f64 / domain_length;
            let nyquist = k.unsigned_abs() as usize == n / 2;
            let keep = !physics.dealias || k.unsigned_abs() as usize <= cutoff;
            linear.push(if physics.dispersion && !nyquist {
                -dispersion_symbol(xi, a)
            } else {
                Complex64::new(0.0, 0.0)
            });
            input_mask.push(if keep { 1.0 } else { 0.0 });
            nonlinear_symbol.push(if keep && !nyquist && physics.nonlinear {
                Complex64::new(0.0, -0.5 * xi)
            } else {
                Complex64::new(0.0, 0.0)
            });
        }
        Self {
            n,
            domain_length,
            physics,
            linear,
            input_mask,
            nonlinear_symbol,
            memo: None,
        }
    }

    fn matches(&self, u: &GridFunction) -> bool {
        self.n == u.n_points() && self.domain_length == u.domain_length()
    }

    /// `-(P (P u)^2)_x / 2` in coefficient space, `P` the dealiasing projector.
    fn nonlinear(&self, v: &[Complex64]) -> Vec<Complex64> {
        if !self.physics.nonlinear {
            return vec![Complex64::new(0.0, 0.0); self.n];
        }
        let mut buf: Vec<Complex64> = v.iter().zip(&self.input_mask).map(|(c, m)| c * m).collect();
        fft_inverse_in_place(&mut buf);
        for b in buf.iter_mut() {
            *b = Complex64::new(b.re * b.re, 0.0);
        }
        fft_forward_in_place(&mut buf);
        let scale = 1.0 / self.n as f64;
        for (b, s) in buf.iter_mut().zip(&self.nonlinear_symbol) {
            *b *= s * scale;
        }
        symmetrize(&mut buf);
        buf
    }

    fn rhs(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.nonlinear(v);
        for ((o, l), c) in out.iter_mut().zip(&self.linear).zip(v) {
            *o += l * c;
        }
        out
    }

    fn ensure_coeffs(&mut self, h: f64) {
        if self.memo.as_ref().map(|(dt, _)| *dt) != Some(h) {
            let n = self.n;
            let mut c = EtdCoeffs {
                e: Vec::with_capacity(n),
                e2: Vec::with_capacity(n),
                q: Vec::with_capacity(n),
                b1: Vec::with_capacity(n),
                b2: Vec::with_capacity(n),
                b4: Vec::with_capacity(n),
            };
            for l in &self.linear {
                let z = l * h;
                let [p1, p2, p3] = phi_functions(z);
                let [half1, _, _] = phi_functions(z * 0.5);
                c.e.push(z.exp());
                c.e2.push((z * 0.5).exp());
                c.q.push(half1 * (0.5 * h));
                c.b1.push((p1 - p2 * 3.0 + p3 * 4.0) * h);
                c.b2.push((p2 * 2.0 - p3 * 4.0) * h);
                c.b4.push((p3 * 4.0 - p2) * h);
            }
            self.memo = Some((h, c));
        }
    }

    fn step(&mut self, v: &[Complex64], h: f64) -> Vec<Complex64> {
        self.ensure_coeffs(h);
        let c = &self.memo.as_ref().expect("weights were just computed").1;
        let nv = self.nonlinear(v);
        let a: Vec<Complex64> = (0..self.n).map(|k| c.e2[k] * v[k] + c.q[k] * nv[k]).collect();
        let na = self.nonlinear(&a);
        let b: Vec<Complex64> = (0..self.n).map(|k| c.e2[k] * v[k] + c.q[k] * na[k]).collect();
        let nb = self.nonlinear(&b);
        let cc: Vec<Complex64> = (0..self.n)
            .map(|k| c.e2[k] * a[k] + c.q[k] * (nb[k] * 2.0 - nv[k]))
            .collect();
        let nc = self.nonlinear(&cc);
        let mut out: Vec<Complex64> = (0..self.n)
            .map(|k| c.e[k] * v[k] + c.b1[k] * nv[k] + c.b2[k] * (na[k] + nb[k]) + c.b4[k] * nc[k])
            .collect();
        symmetrize(&mut out);
        out
    }
}

fn checked_field(domain_length: f64, coeffs: Vec<Complex64>) -> Result<GridFunction> {
    if let Some(j) = coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::NumericOverflow {
            context: format!("right-hand side mode {} is not finite", signed_mode(j, coeffs.len())),
        });
    }
    GridFunction::from_coeffs(domain_length, coeffs)
}

/// `-H Lambda^alpha u - u u_x` for the full, dealiased equation.
pub fn rhs(u: &GridFunction, alpha: Alpha) -> Result<GridFunction> {
    rhs_with(u, &Physics::full(alpha))
}

/// Right-hand side with the given terms switched on.
pub fn rhs_with(u: &GridFunction, physics: &Physics) -> Result<GridFunction> {
    let ws = Workspace::new(u.domain_length(), u.n_points(), *physics);
    checked_field(u.domain_length(), ws.rhs(u.coeffs()))
}

#[derive(Clone, Debug)]
pub enum StepOutcome {
    Advanced(SolverState),
    /// The step produced non-finite values.
    BlowUp { t: f64 },
}

/// Reusable single-grid stepper; weights are cached for the last step size.
pub struct EtdStepper {
    ws: Workspace,
}

impl EtdStepper {
    pub fn new(domain_length: f64, n_points: usize, physics: Physics) -> Self {
        Self {
            ws: Workspace::new(domain_length, n_points, physics),
        }
    }

    /// Advances by `dt`. Negative `dt` integrates backwards.
    pub fn step(&mut self, state: &SolverState, dt: f64) -> Result<StepOutcome> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::Domain(format!("step size must be finite and nonzero, got {dt}")));
        }
        if !self.ws.matches(&state.u) {
            self.ws = Workspace::new(state.u.domain_length(), state.u.n_points(), self.ws.physics);
        }
        let out = self.ws.step(state.u.coeffs(), dt);
        if out.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Ok(StepOutcome::BlowUp { t: state.t });
        }
        // Drop the cached coefficients: the grid values are the canonical state,
        // so a run restored from saved values continues identically.
        let length = state.u.domain_length();
        match GridFunction::from_coeffs(length, out).and_then(|u| GridFunction::new(length, u.into_values())) {
            Ok(u) => Ok(StepOutcome::Advanced(state.advanced(u, state.t + dt))),
            Err(Error::NumericOverflow { .. }) => Ok(StepOutcome::BlowUp { t: state.t }),
            Err(e) => Err(e),
        }
    }

    pub fn time_derivative(&mut self, u: &GridFunction) -> Result<GridFunction> {
        if !self.ws.matches(u) {
            self.ws = Workspace::new(u.domain_length(), u.n_points(), self.ws.physics);
        }
        checked_field(u.domain_length(), self.ws.rhs(u.coeffs()))
    }
}

/// One exponential time differencing step of size `dt > 0`.
pub fn step_etd(state: &SolverState, dt: f64, physics: &Physics) -> Result<StepOutcome> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("step size must be positive, got {dt}")));
    }
    EtdStepper::new(state.u.domain_length(), state.u.n_points(), *physics).step(state, dt)
}

// ---------------------------------------------------------------------------
// Checkpoints.

/// Self-describing restart record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: SolverConfig,
    pub t: f64,
    pub step_count: u64,
    pub l2_initial: f64,
    pub mean_initial: f64,
    pub values: Vec<f64>,
}

impl Checkpoint {
    pub fn capture(config: &SolverConfig, state: &SolverState) -> Self {
        Self {
            config: config.clone(),
            t: state.t,
            step_count: state.step_count,
            l2_initial: state.l2_initial,
            mean_initial: state.mean_initial,
            values: state.u.values().to_vec(),
        }
    }

    pub fn state(&self) -> Result<SolverState> {
        Ok(SolverState {
            u: GridFunction::new(self.config.domain_length, self.values.clone())?,
            t: self.t,
            step_count: self.step_count,
            l2_initial: self.l2_initial,
            mean_initial: self.mean_initial,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

// ---------------------------------------------------------------------------
// Runs.

/// Integrates from `u0` at `t = 0`.
pub fn run(config: &SolverConfig, u0: GridFunction) -> Result<Trajectory> {
    run_with_checkpoints(config, u0, |_| Ok(()))
}

pub fn run_with_checkpoints(
    config: &SolverConfig,
    u0: GridFunction,
    on_checkpoint: impl FnMut(&Checkpoint) -> Result<()>,
) -> Result<Trajectory> {
    config.validate()?;
    if u0.n_points() != config.n_points || u0.domain_length() != config.domain_length {
        return Err(Error::Config(format!(
            "initial field has {} points on length {}, config asks for {} on {}",
            u0.n_points(),
            u0.domain_length(),
            config.n_points,
            config.domain_length
        )));
    }
    run_from(config, SolverState::initial(u0), on_checkpoint)
}

/// Continues a run from an arbitrary state, e.g. one restored from a checkpoint.
pub fn run_from(
    config: &SolverConfig,
    start: SolverState,
    mut on_checkpoint: impl FnMut(&Checkpoint) -> Result<()>,
) -> Result<Trajectory> {
    config.validate()?;
    let physics = config.physics();
    let mut stepper = EtdStepper::new(start.u.domain_length(), start.u.n_points(), physics);
    let mut state = start;

    let mut records = vec![StepRecord::measure(&state.u, state.t, 0.0, config.dealias)?];
    let mut snapshots = vec![Snapshot {
        dudt: stepper.time_derivative(&state.u)?,
        state: state.clone(),
    }];

    let end = loop {
        if state.t >= config.t_end {
            break RunEnd::TEnd;
        }
        if state.step_count >= config.max_steps {
            break RunEnd::MaxSteps;
        }
        let mut exhausted = false;
        while state.u.high_band_fraction(config.dealias) > config.refine_threshold {
            let n = state.u.n_points();
            if 2 * n > config.max_points {
                exhausted = true;
                break;
            }
            state.u = state.u.padded(2 * n)?;
        }
        if exhausted {
            break RunEnd::ResolutionExhausted;
        }

        let (dt, hits_end) = adaptive_dt(config, &state)?;
        let next = match stepper.step(&state, dt)? {
            StepOutcome::Advanced(s) => s,
            StepOutcome::BlowUp { .. } => break RunEnd::NonFinite,
        };
        state = next;
        if hits_end {
            state.t = config.t_end;
        }
        let record = StepRecord::measure(&state.u, state.t, dt, config.dealias)?;
        records.push(record);

        let stop = record.min_slope < config.slope_stop;
        if stop || state.step_count % config.snapshot_every as u64 == 0 {
            snapshots.push(Snapshot {
                dudt: stepper.time_derivative(&state.u)?,
                state: state.clone(),
            });
        }
        if config.checkpoint_every > 0 && state.step_count % config.checkpoint_every == 0 {
            on_checkpoint(&Checkpoint::capture(config, &state))?;
        }
        if stop {
            break RunEnd::SlopeStop;
        }
    };

    if snapshots.last().map(|s| s.t()) != Some(state.t) {
        snapshots.push(Snapshot {
            dudt: stepper.time_derivative(&state.u)?,
            state,
        });
    }
    Ok(Trajectory {
        config: config.clone(),
        snapshots,
        records,
        end,
    })
}

/// `min(dt_initial, cfl * min(1/|u_x|_inf, dx/|u|_inf), t_end - t)`.
fn adaptive_dt(config: &SolverConfig, state: &SolverState) -> Result<(f64, bool)> {
    let ux_sup = spectral_derivative(&state.u, 1)?.sup_norm();
    let u_sup = state.u.sup_norm();
    let cfl = (1.0 / ux_sup).min(state.u.dx() / u_sup) * config.cfl_safety;
    let dt = config.dt_initial.min(cfl);
    let remaining = config.t_end - state.t;
    // Absorb round-off slivers into the final step.
    Ok(if remaining <= dt * (1.0 + 1e-9) { (remaining, true) } else { (dt, false) })
}

/// Largest relative deviation from `u_lam(x, t) = lam^(alpha-1) u(lam x, lam^alpha t)`
/// between a run of `config` from `f` and a run on the domain shrunk by `lam`
/// with `dt_initial` and `t_end` scaled by `lam^-alpha`.
pub fn scaling_symmetry_error(config: &SolverConfig, f: impl Fn(f64) -> f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("scale factor must be positive, got {lambda}")));
    }
    let a = config.alpha.value();
    let (l, n) = (config.domain_length, config.n_points);
    let mut scaled = config.clone();
    scaled.domain_length = l / lambda;
    scaled.dt_initial = config.dt_initial * lambda.powf(-a);
    scaled.t_end = config.t_end * lambda.powf(-a);
    let amp = lambda.powf(a - 1.0);

    let u = run(config, GridFunction::from_fn(l, n, &f)?)?;
    let v = run(&scaled, GridFunction::from_fn(l / lambda, n, |x| amp * f(lambda * x))?)?;
    let (ua, va) = (&u.last().state.u, &v.last().state.u);
    if u.records.len() != v.records.len() || ua.n_points() != va.n_points() {
        return Ok(f64::INFINITY);
    }
    let scale = amp * ua.sup_norm();
    Ok(ua
        .values()
        .iter()
        .zip(va.values())
        .map(|(p, q)| (amp * p - q).abs() / scale)
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Diagnostics.

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservedDiagnostics {
    pub l2_drift: f64,
    /// Mean drift relative to `max(|mean_0|, ||u_0||_2 / sqrt(L))`.
    pub mean_drift: f64,
}

pub fn conserved_diagnostics(state: &SolverState) -> ConservedDiagnostics {
    let l2 = state.u.l2_norm();
    let l2_drift = if state.l2_initial > 0.0 {
        (l2 - state.l2_initial).abs() / state.l2_initial
    } else {
        l2
    };
    let scale = state
        .mean_initial
        .abs()
        .max(state.l2_initial / state.u.domain_length().sqrt());
    let dm = (state.u.mean() - state.mean_initial).abs();
    ConservedDiagnostics {
        l2_drift,
        mean_drift: if scale > 0.0 { dm / scale } else { dm },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyIdentity {
    /// Centered difference of `||u_xx||^2`.
    pub lhs: f64,
    /// `-5 int u_x u_xx^2`.
    pub rhs: f64,
    pub residual: f64,
}

/// `||u_xx||_2^2`.
pub fn curvature_energy(u: &GridFunction) -> f64 {
    u.derivative_l2_norm(2).powi(2)
}

/// `-5 int u_x u_xx^2`, integrated without aliasing on a doubled grid.
pub fn curvature_flux(u: &GridFunction) -> Result<f64> {
    let fine = u.padded(2 * u.n_points())?;
    let ux = spectral_derivative(&fine, 1)?;
    let uxx = spectral_derivative(&fine, 2)?;
    let s: f64 = ux.values().iter().zip(uxx.values()).map(|(a, b)| a * b * b).sum();
    Ok(-5.0 * s * fine.dx())
}

/// Compares `d/dt ||u_xx||^2`, by a centered difference of half-width `h`,
/// with `-5 int u_x u_xx^2` at the state itself.
pub fn energy_identity_check(state: &SolverState, physics: &Physics, h: f64) -> Result<EnergyIdentity> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("difference step must be positive, got {h}")));
    }
    let mut stepper = EtdStepper::new(state.u.domain_length(), state.u.n_points(), *physics);
    let mut energy_at = |dt: f64| -> Result<f64> {
        match stepper.step(state, dt)? {
            StepOutcome::Advanced(s) => Ok(curvature_energy(&s.u)),
            StepOutcome::BlowUp { t } => Err(Error::NumericOverflow {
                context: format!("energy probe step from t = {t}"),
            }),
        }
    };
    let lhs = (energy_at(h)? - energy_at(-h)?) / (2.0 * h);
    let rhs = curvature_flux(&state.u)?;
    let scale = lhs.abs().max(rhs.abs());
    Ok(EnergyIdentity {
        lhs,
        rhs,
        residual: if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 },
    })
}
