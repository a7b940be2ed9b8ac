//! Literal evaluation of the breaking theorems' hypotheses on a given datum,
//! admissible constant windows, candidate steep data and the combinatorial
//! lemma behind the Gevrey cascade.

use std::f64::consts::{E, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::spectral::{signed_mode, spectral_derivative, Alpha, GridFunction};

/// Which breaking statement's hypotheses are checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Gevrey-class data, `0 < alpha < 1/2` as `eps -> 0`.
    Gevrey,
    /// `H^2` data, `0 < alpha < 1/3` as `eps -> 0`.
    Sobolev,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Theorem::Gevrey => "gevrey",
            Theorem::Sobolev => "sobolev",
        })
    }
}

impl std::str::FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gevrey" => Ok(Theorem::Gevrey),
            "sobolev" => Ok(Theorem::Sobolev),
            other => domain(format!("unknown statement {other:?}; expected gevrey or sobolev")),
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        domain(format!("eps must lie in (0, 1), got {eps}"))
    }
}

/// Open upper bound on `alpha` for the given `eps`.
pub fn alpha_range(eps: f64, theorem: Theorem) -> Result<f64> {
    check_eps(eps)?;
    let a2 = (1.0 - eps).powi(2);
    Ok(match theorem {
        Theorem::Gevrey => a2 / (3.0 * (1.0 + eps).powi(3) - a2),
        Theorem::Sobolev => a2 / (5.0 - 2.0 * a2),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaValue {
    pub sigma: f64,
    pub sigma_alpha_lt_1: bool,
}

/// Smallest admissible Gevrey-cascade exponent (nudged up by `1e-9`
/// relative) and whether `sigma * alpha < 1`.
pub fn sigma_value(eps: f64, alpha: Alpha) -> Result<SigmaValue> {
    check_eps(eps)?;
    let sigma = (3.0 * (1.0 + eps).powi(3) / (1.0 - eps).powi(2) - 1.0) * (1.0 + 1e-9);
    Ok(SigmaValue {
        sigma,
        sigma_alpha_lt_1: sigma * alpha.value() < 1.0,
    })
}

/// The exponent used for the `H^2` statement, `5/(1 - eps)^2 - 2`.
pub fn sigma_value_sobolev(eps: f64, alpha: Alpha) -> Result<SigmaValue> {
    check_eps(eps)?;
    let sigma = 5.0 / (1.0 - eps).powi(2) - 2.0;
    Ok(SigmaValue {
        sigma,
        sigma_alpha_lt_1: sigma * alpha.value() < 1.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StirlingCheck {
    pub n: usize,
    pub alpha: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub log_lhs: f64,
    pub log_rhs: f64,
    pub holds: bool,
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    (0..k).map(|j| ((n - j) as f64 / (j + 1) as f64).ln()).sum()
}

/// `sum_{j=2}^{n-1} C(n,j) (j-1)^{(j-1)/a} (n-j)^{(n-j)/a}` against
/// `e/(1/a - 1) (3/2)^{1/a - 1} n (n-1)^{(n-1)/a}`, in log space.
pub fn stirling_lemma_check(n: usize, alpha: Alpha) -> Result<StirlingCheck> {
    if !(3..=40).contains(&n) {
        return domain(format!("stirling check needs 3 <= n <= 40, got {n}"));
    }
    if !alpha.is_subunit() {
        return domain("stirling check needs alpha < 1");
    }
    let inv = 1.0 / alpha.value();
    let xlogx = |m: usize| if m <= 1 { 0.0 } else { m as f64 * (m as f64).ln() };
    let terms: Vec<f64> = (2..n)
        .map(|j| ln_binomial(n, j) + inv * (xlogx(j - 1) + xlogx(n - j)))
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_lhs = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    let log_rhs = 1.0 - (inv - 1.0).ln() + (inv - 1.0) * 1.5f64.ln() + (n as f64).ln() + inv * xlogx(n - 1);
    Ok(StirlingCheck {
        n,
        alpha: alpha.value(),
        lhs: log_lhs.exp(),
        rhs: log_rhs.exp(),
        log_lhs,
        log_rhs,
        holds: log_lhs <= log_rhs,
    })
}

// ---------------------------------------------------------------------------
// Initial data.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatumKind {
    /// `-A sin(2 pi x / L)`.
    ScaledSine,
    /// `-A d/dx exp(-(x - L/2)^2 / lam^2)`.
    BumpDerivative,
    Custom,
}

impl std::str::FromStr for DatumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled-sine" | "sine" => Ok(DatumKind::ScaledSine),
            "bump-derivative" | "bump" => Ok(DatumKind::BumpDerivative),
            other => domain(format!("unknown datum kind {other:?}")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DatumProfile {
    pub kind: DatumKind,
    pub amplitude: f64,
    pub width: f64,
    /// `inf phi' = -amplitude * shape_constant` (analytic).
    pub shape_constant: f64,
    pub grid: GridFunction,
}

/// Largest tolerated spectral amplitude in the top third of the band.
pub const DATUM_TAIL_LIMIT: f64 = 1e-12;

/// Relative amplitude of the top third of the spectrum.
pub fn spectral_tail(u: &GridFunction) -> f64 {
    u.high_band_fraction(false).sqrt()
}

pub fn datum_factory(kind: DatumKind, amplitude: f64, lam: f64, domain_length: f64, n_points: usize) -> Result<DatumProfile> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return domain(format!("amplitude must be positive, got {amplitude}"));
    }
    let (grid, width, shape) = match kind {
        DatumKind::ScaledSine => {
            let k = 2.0 * PI / domain_length;
            (
                GridFunction::from_fn(domain_length, n_points, |x| -amplitude * (k * x).sin())?,
                domain_length,
                k,
            )
        }
        DatumKind::BumpDerivative => {
            if !(lam > 0.0) {
                return domain(format!("bump width must be positive, got {lam}"));
            }
            let c = domain_length / 2.0;
            (
                GridFunction::from_fn(domain_length, n_points, |x| {
                    let s = (x - c) / lam;
                    amplitude * 2.0 * s / lam * (-s * s).exp()
                })?,
                lam,
                4.0 * (-1.5f64).exp() / (lam * lam),
            )
        }
        DatumKind::Custom => return domain("custom data are built with DatumProfile::custom"),
    };
    let tail = spectral_tail(&grid);
    if tail > DATUM_TAIL_LIMIT {
        return Err(Error::Resolution(format!(
            "datum is not resolved: spectral tail {tail:.2e} exceeds {DATUM_TAIL_LIMIT:.0e} (width {width}, dx {})",
            grid.dx()
        )));
    }
    Ok(DatumProfile {
        kind,
        amplitude,
        width,
        shape_constant: shape,
        grid,
    })
}

impl DatumProfile {
    /// Wraps arbitrary grid data; amplitude and shape are derived from it.
    pub fn custom(grid: GridFunction) -> Result<Self> {
        let m = spectral_derivative(&grid, 1)?.min_refined().1;
        if !(m < 0.0) {
            return domain("custom datum has no negative slope");
        }
        Ok(Self {
            kind: DatumKind::Custom,
            amplitude: -m,
            width: grid.domain_length(),
            shape_constant: 1.0,
            grid,
        })
    }

    /// Same shape, amplitude multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Ok(Self {
            amplitude: self.amplitude * c,
            grid: self.grid.scaled(c)?,
            ..self.clone()
        })
    }
}

// ---------------------------------------------------------------------------
// Norm inputs and constant windows.

/// Every norm of the datum the hypotheses refer to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormInputs {
    pub sup: f64,
    pub sup_d1: f64,
    pub inf_d1: f64,
    pub h2: f64,
    pub h3: f64,
    pub d2_l2: f64,
    /// `||phi||_{H^{alpha + 3/2 + 0.01}}`, the embedding bound on `|K_1(0)|`.
    pub embedding: f64,
}

/// Margin above `3/2 + alpha` used for the Sobolev embedding exponent.
pub const EMBEDDING_EXCESS: f64 = 0.01;

pub fn norm_inputs(phi: &GridFunction, alpha: Alpha) -> Result<NormInputs> {
    let d1 = spectral_derivative(phi, 1)?;
    Ok(NormInputs {
        sup: phi.sup_refined().1,
        sup_d1: d1.sup_refined().1,
        inf_d1: d1.min_refined().1,
        h2: phi.sobolev_norm(2.0),
        h3: phi.sobolev_norm(3.0),
        d2_l2: phi.derivative_l2_norm(2),
        embedding: phi.sobolev_norm(alpha.value() + 1.5 + EMBEDDING_EXCESS),
    })
}

/// Open interval `(lower, upper)`; `upper = None` means unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lower: f64,
    pub upper: Option<f64>,
}

impl Window {
    pub fn is_empty(&self) -> bool {
        self.upper.is_some_and(|u| u <= self.lower)
    }

    pub fn contains(&self, v: f64) -> bool {
        v > self.lower && self.upper.map_or(true, |u| v < u)
    }

    pub fn width(&self) -> f64 {
        self.upper.map_or(f64::INFINITY, |u| u - self.lower)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantWindows {
    pub c0: Window,
    pub c1: Window,
    pub c2: Window,
    pub feasible: bool,
}

/// Admissible intervals for `C0, C1, C2` implied by the datum alone.
pub fn constants_feasible(phi: &DatumProfile, alpha: Alpha, eps: f64, theorem: Theorem) -> Result<ConstantWindows> {
    check_eps(eps)?;
    let n = norm_inputs(&phi.grid, alpha)?;
    Ok(windows_from_norms(&n, alpha, eps, theorem))
}

fn windows_from_norms(n: &NormInputs, alpha: Alpha, eps: f64, theorem: Theorem) -> ConstantWindows {
    let a = alpha.value();
    let (c0, c1, c2) = match theorem {
        Theorem::Gevrey => {
            let p = 1.0 / a - 1.0;
            let c2_upper = (1.0 + eps) / (1.0 - eps) * (-(p / E) * (2.0f64 / 3.0).powf(p) * n.inf_d1);
            (
                Window {
                    lower: (n.sup + n.sup_d1) / (1.0 - eps),
                    upper: None,
                },
                Window {
                    lower: n.sup_d1 / (1.0 - eps),
                    upper: Some(-(1.0 + eps) * n.inf_d1 / (1.0 - eps)),
                },
                Window {
                    lower: 0.0,
                    upper: Some(c2_upper),
                },
            )
        }
        Theorem::Sobolev => {
            let root = ((1.0 - 2.0 * a) / 2.0).max(0.0).sqrt();
            (
                Window {
                    lower: 2.0 * (n.sup + n.sup_d1),
                    upper: None,
                },
                Window {
                    lower: 2.0 * n.sup_d1,
                    upper: None,
                },
                Window {
                    lower: if root > 0.0 { n.d2_l2 / root } else { f64::INFINITY },
                    upper: None,
                },
            )
        }
    };
    ConstantWindows {
        c0,
        c1,
        c2,
        feasible: !(c0.is_empty() || c1.is_empty() || c2.is_empty()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Per-order Gevrey inputs: `||phi^(n)||_inf`, the requirement
/// `(n-1)^{(n-1)/alpha}` and the round-off floor of the derivative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyTerm {
    pub n: usize,
    pub sup: f64,
    pub weight: f64,
    pub noise: f64,
}

/// Relative coefficient threshold applied before high-order differentiation.
pub const COEFF_FLOOR: f64 = 1e-13;

pub fn gevrey_terms(phi: &GridFunction, alpha: Alpha, n_max: usize) -> Result<Vec<GevreyTerm>> {
    if n_max > 12 {
        return domain(format!("Gevrey orders above 12 are not checked, got n_max = {n_max}"));
    }
    let cmax = phi.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let cleaned = phi.map_modes(|_, _, c| {
        if c.norm() < COEFF_FLOOR * cmax {
            Complex64::new(0.0, 0.0)
        } else {
            c
        }
    })?;
    let n_pts = phi.n_points();
    (2..=n_max)
        .map(|n| {
            let d = spectral_derivative(&cleaned, n)?;
            let noise: f64 = 4.0
                * f64::EPSILON
                * cleaned
                    .coeffs()
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        let xi = 2.0 * PI * signed_mode(j, n_pts) as f64 / phi.domain_length();
                        xi.abs().powi(n as i32) * c.norm()
                    })
                    .sum::<f64>();
            Ok(GevreyTerm {
                n,
                sup: d.sup_refined().1,
                weight: ((n - 1) as f64).powf((n - 1) as f64 / alpha.value()),
                noise,
            })
        })
        .collect()
}

/// Constants just inside their windows: lower ends times `1 + 1e-3`, and
/// `C2` just above what the Gevrey condition demands (or its lower end for `H^2` data).
pub fn default_constants(phi: &DatumProfile, alpha: Alpha, eps: f64, theorem: Theorem, n_max: usize) -> Result<Constants> {
    let w = constants_feasible(phi, alpha, eps, theorem)?;
    let bump = 1.0 + 1e-3;
    let c2 = match theorem {
        Theorem::Gevrey => {
            let need = gevrey_terms(&phi.grid, alpha, n_max)?
                .iter()
                .map(|g| g.sup / g.weight)
                .fold(0.0, f64::max);
            need * bump
        }
        Theorem::Sobolev => w.c2.lower * bump,
    };
    Ok(Constants {
        c0: w.c0.lower * bump,
        c1: w.c1.lower * bump,
        c2,
    })
}

// ---------------------------------------------------------------------------
// Reports.

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityRecord {
    pub name: String,
    /// The inequality reads `lhs > rhs`.
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// `(lhs - rhs) / max(|lhs|, |rhs|)`; positive when satisfied.
    pub margin: f64,
    /// The gap is below the numerical noise floor of the inputs.
    pub inconclusive: bool,
}

impl InequalityRecord {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::with_noise(name, lhs, rhs, 0.0)
    }

    fn with_noise(name: impl Into<String>, lhs: f64, rhs: f64, noise: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let margin = if scale > 0.0 { (lhs - rhs) / scale } else { 0.0 };
        Self {
            name: name.into(),
            lhs,
            rhs,
            satisfied: lhs > rhs,
            margin,
            inconclusive: (lhs - rhs).abs() <= noise,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreySummary {
    pub n_max: usize,
    pub first_violation: Option<usize>,
    pub inconclusive: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub theorem: Theorem,
    pub alpha: f64,
    pub eps: f64,
    pub alpha_ok: bool,
    /// `alpha_range - alpha`.
    pub alpha_margin: f64,
    pub norms: NormInputs,
    pub constants: Constants,
    pub windows: ConstantWindows,
    pub constants_inside_windows: bool,
    pub records: Vec<InequalityRecord>,
    pub gevrey: Option<GevreySummary>,
    pub sigma: SigmaValue,
    pub overall: bool,
}

impl HypothesisReport {
    pub fn record(&self, name: &str) -> Option<&InequalityRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    /// All named records satisfied.
    pub fn satisfies(&self, names: &[&str]) -> bool {
        names.iter().all(|n| self.record(n).is_some_and(|r| r.satisfied))
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} data  alpha {}  eps {}  (alpha bound {:.6}, sigma {:.6}, sigma*alpha<1: {})",
            self.theorem,
            self.alpha,
            self.eps,
            self.alpha + self.alpha_margin,
            self.sigma.sigma,
            self.sigma.sigma_alpha_lt_1
        )?;
        writeln!(
            f,
            "constants C0 {:.6e}  C1 {:.6e}  C2 {:.6e}  inside windows: {}",
            self.constants.c0, self.constants.c1, self.constants.c2, self.constants_inside_windows
        )?;
        writeln!(f, "{:<16} {:>14} {:>14} {:>11}  status", "inequality", "lhs", "rhs", "margin")?;
        for r in &self.records {
            let status = match (r.satisfied, r.inconclusive) {
                (_, true) => "inconclusive",
                (true, false) => "ok",
                (false, false) => "FAIL",
            };
            writeln!(f, "{:<16} {:>14.6e} {:>14.6e} {:>11.3e}  {status}", r.name, r.lhs, r.rhs, r.margin)?;
        }
        write!(f, "overall: {}", if self.overall { "satisfied" } else { "not satisfied" })
    }
}

fn finish(
    theorem: Theorem,
    alpha: Alpha,
    eps: f64,
    norms: NormInputs,
    constants: Constants,
    windows: ConstantWindows,
    mut records: Vec<InequalityRecord>,
    gevrey: Option<GevreySummary>,
    sigma: SigmaValue,
) -> Result<HypothesisReport> {
    let bound = alpha_range(eps, theorem)?;
    let alpha_record = InequalityRecord::new("alpha", bound, alpha.value());
    let alpha_ok = alpha_record.satisfied;
    records.insert(0, alpha_record);
    records.push(InequalityRecord::new("sigma*alpha<1", 1.0, sigma.sigma * alpha.value()));
    let inside = windows.c0.contains(constants.c0) && windows.c1.contains(constants.c1) && windows.c2.contains(constants.c2);
    let overall = records.iter().all(|r| r.satisfied);
    Ok(HypothesisReport {
        theorem,
        alpha: alpha.value(),
        eps,
        alpha_ok,
        alpha_margin: bound - alpha.value(),
        norms,
        constants,
        windows,
        constants_inside_windows: inside,
        records,
        gevrey,
        sigma,
        overall,
    })
}

/// Hypotheses of the Gevrey-data statement, each evaluated as written.
pub fn check_gevrey(
    phi: &DatumProfile,
    alpha: Alpha,
    eps: f64,
    constants: Constants,
    n_max: usize,
) -> Result<HypothesisReport> {
    check_eps(eps)?;
    if !alpha.is_subunit() {
        return domain(format!("the Gevrey statement needs alpha < 1, got {alpha}"));
    }
    let n = norm_inputs(&phi.grid, alpha)?;
    let a = alpha.value();
    let m = n.inf_d1;
    let Constants { c0, c1, c2 } = constants;
    let p = 1.0 / a - 1.0;
    let mut records = vec![
        InequalityRecord::new(
            "steepness.norm",
            eps * eps * m * m,
            n.h3 + 2.0 / a * (3.0 * c1 + c2 / (1.0 - a)),
        ),
        InequalityRecord::new(
            "steepness.ratio",
            -eps * (1.0 - eps).powi(3) * m,
            2.0 / (a * (1.0 - a)) * (3.0 + (c1 / c0 + c2 / c1) / (1.0 - a)),
        ),
        InequalityRecord::new(
            "steepness.local",
            -eps * (1.0 + eps) / (1.0 - eps) * m,
            6.0 / a * (1.0 + eps.powf(1.0 / a)),
        ),
        InequalityRecord::new("c0.lower", (1.0 - eps) * c0, n.sup + n.sup_d1),
        InequalityRecord::new("c1.lower", (1.0 - eps) * c1, n.sup_d1),
        InequalityRecord::new("c1.upper", -(1.0 + eps) * m, (1.0 - eps) * c1),
        InequalityRecord::new("c2.lower", (1.0 - eps) / (1.0 + eps) * c2, 0.0),
        InequalityRecord::new(
            "c2.upper",
            -(p / E) * (2.0f64 / 3.0).powf(p) * m,
            (1.0 - eps) / (1.0 + eps) * c2,
        ),
        InequalityRecord::new("kernel.initial", eps * eps * m * m, n.embedding),
    ];
    let terms = gevrey_terms(&phi.grid, alpha, n_max)?;
    let mut first_violation = None;
    let mut inconclusive = Vec::new();
    for g in &terms {
        let r = InequalityRecord::with_noise(format!("gevrey.n{}", g.n), c2 * g.weight, g.sup, g.noise);
        if r.inconclusive {
            inconclusive.push(g.n);
        } else if !r.satisfied && first_violation.is_none() {
            first_violation = Some(g.n);
        }
        records.push(r);
    }
    let windows = windows_from_norms(&n, alpha, eps, Theorem::Gevrey);
    finish(
        Theorem::Gevrey,
        alpha,
        eps,
        n,
        constants,
        windows,
        records,
        Some(GevreySummary {
            n_max,
            first_violation,
            inconclusive,
        }),
        sigma_value(eps, alpha)?,
    )
}

/// Hypotheses of the `H^2`-data statement.
pub fn check_sobolev(phi: &DatumProfile, alpha: Alpha, eps: f64, constants: Constants) -> Result<HypothesisReport> {
    check_eps(eps)?;
    if !alpha.below_half() {
        return domain(format!("the H^2 statement needs alpha < 1/2, got {alpha}"));
    }
    let n = norm_inputs(&phi.grid, alpha)?;
    let a = alpha.value();
    let m = n.inf_d1;
    let Constants { c0, c1, c2 } = constants;
    let records = vec![
        InequalityRecord::new("steepness.norm", eps * eps * m * m, n.h2 + (6.0 * c1 + c2) / a),
        InequalityRecord::new(
            "steepness.ratio",
            -m,
            4.0 / (a * (1.0 - a)) * (3.0 + c1 / c0 / (1.0 - a)) + 2.0 / a * (6.0 + c2 / c1),
        ),
        InequalityRecord::new("c0.lower", 0.5 * c0, n.sup + n.sup_d1),
        InequalityRecord::new("c1.lower", 0.5 * c1, n.sup_d1),
        InequalityRecord::new("c2.lower", ((1.0 - 2.0 * a) / 2.0).sqrt() * c2, n.d2_l2),
        InequalityRecord::new("kernel.initial", eps * eps * m * m, n.embedding),
    ];
    let windows = windows_from_norms(&n, alpha, eps, Theorem::Sobolev);
    finish(
        Theorem::Sobolev,
        alpha,
        eps,
        n,
        constants,
        windows,
        records,
        None,
        sigma_value_sobolev(eps, alpha)?,
    )
}

pub fn check_theorem(
    theorem: Theorem,
    phi: &DatumProfile,
    alpha: Alpha,
    eps: f64,
    constants: Constants,
    n_max: usize,
) -> Result<HypothesisReport> {
    match theorem {
        Theorem::Gevrey => check_gevrey(phi, alpha, eps, constants, n_max),
        Theorem::Sobolev => check_sobolev(phi, alpha, eps, constants),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeThreshold {
    pub inequalities: Vec<String>,
    /// Smallest amplitude multiple satisfying all of them (relative tolerance `1e-10`).
    pub factor: f64,
    pub amplitude: f64,
    pub iterations: usize,
}

/// Bisects on the amplitude of `phi` (constants re-chosen by
/// [`default_constants`] at every amplitude) for the smallest scale at which
/// every named inequality holds. `None` if no scale up to `2^200` works.
pub fn amplitude_threshold(
    phi: &DatumProfile,
    alpha: Alpha,
    eps: f64,
    theorem: Theorem,
    names: &[&str],
    n_max: usize,
) -> Result<Option<AmplitudeThreshold>> {
    let holds = |c: f64| -> Result<bool> {
        let scaled = phi.scaled(c)?;
        let k = default_constants(&scaled, alpha, eps, theorem, n_max)?;
        Ok(check_theorem(theorem, &scaled, alpha, eps, k, n_max)?.satisfies(names))
    };
    let mut iterations = 0;
    let (mut lo, mut hi) = (1.0, 1.0);
    if holds(1.0)? {
        while holds(lo / 2.0)? && lo > 1e-300 {
            lo /= 2.0;
            iterations += 1;
        }
        hi = lo;
        lo /= 2.0;
    } else {
        loop {
            hi *= 2.0;
            iterations += 1;
            if holds(hi)? {
                break;
            }
            if iterations > 200 {
                return Ok(None);
            }
            lo = hi;
        }
    }
    while (hi - lo) > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(Some(AmplitudeThreshold {
        inequalities: names.iter().map(|s| s.to_string()).collect(),
        factor: hi,
        amplitude: hi * phi.amplitude,
        iterations,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha(a: f64) -> Alpha {
        Alpha::new(a).unwrap()
    }

    fn sine(a: f64) -> DatumProfile {
        datum_factory(DatumKind::ScaledSine, a, 0.0, 2.0 * PI, 64).unwrap()
    }

    #[test]
    fn alpha_range_values() {
        let r = alpha_range(0.1, Theorem::Gevrey).unwrap();
        assert!((r - 0.81 / (3.0 * 1.331 - 0.81)).abs() < 1e-15);
        assert!(alpha_range(0.0, Theorem::Gevrey).is_err());
        assert!(alpha_range(1.0, Theorem::Sobolev).is_err());
    }

    #[test]
    fn sigma_at_tenth() {
        let s = sigma_value(0.1, alpha(0.25)).unwrap();
        assert!((s.sigma - (3.0 * 1.331 / 0.81 - 1.0)).abs() < 1e-8);
        assert!(s.sigma_alpha_lt_1);
        assert!(!sigma_value(0.1, alpha(0.26)).unwrap().sigma_alpha_lt_1);
    }

    #[test]
    fn stirling_small_case() {
        let c = stirling_lemma_check(3, alpha(0.25)).unwrap();
        assert!((c.lhs - 3.0).abs() < 1e-12);
        let rhs = E / 3.0 * 1.5f64.powi(3) * 3.0 * 256.0;
        assert!((c.rhs - rhs).abs() < 1e-9 * rhs);
        assert!(c.holds);
    }

    #[test]
    fn sine_windows_match_hand_arithmetic() {
        let w = constants_feasible(&sine(1.0), alpha(0.2), 0.1, Theorem::Gevrey).unwrap();
        assert!((w.c0.lower - 2.0 / 0.9).abs() < 1e-10);
        assert!((w.c1.lower - 1.0 / 0.9).abs() < 1e-10);
        assert!((w.c1.upper.unwrap() - 1.1 / 0.9).abs() < 1e-10);
    }

    #[test]
    fn sine_gevrey_is_order_independent() {
        let terms = gevrey_terms(&sine(3.0).grid, alpha(0.2), 8).unwrap();
        for g in terms {
            assert!((g.sup - 3.0).abs() < 1e-9 * 3.0, "n={} sup={}", g.n, g.sup);
        }
    }

    #[test]
    fn sobolev_statement_rejects_large_alpha() {
        let k = Constants { c0: 10.0, c1: 10.0, c2: 10.0 };
        assert!(check_sobolev(&sine(1.0), alpha(0.5), 0.1, k).is_err());
    }

    #[test]
    fn report_overall_is_conjunction() {
        let phi = sine(1.0);
        let k = default_constants(&phi, alpha(0.2), 0.1, Theorem::Gevrey, 8).unwrap();
        let r = check_gevrey(&phi, alpha(0.2), 0.1, k, 8).unwrap();
        assert_eq!(r.overall, r.records.iter().all(|x| x.satisfied));
        assert!(!r.record("steepness.norm").unwrap().satisfied);
        assert!(r.to_string().contains("steepness.norm"));
    }

    #[test]
    fn bump_slope_matches_shape_constant() {
        let p = datum_factory(DatumKind::BumpDerivative, 3.0, 0.5, 16.0, 1024).unwrap();
        let m = spectral_derivative(&p.grid, 1).unwrap().min_refined().1;
        assert!((m + p.amplitude * p.shape_constant).abs() < 1e-9 * m.abs());
    }

    #[test]
    fn unresolved_bump_is_rejected() {
        let r = datum_factory(DatumKind::BumpDerivative, 1.0, 0.05, 16.0, 64);
        assert!(matches!(r, Err(Error::Resolution(_))));
    }
}
