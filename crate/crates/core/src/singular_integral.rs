//! Real-space evaluation of the singular-integral form of the dispersion operator.
//!
//! For `0 < alpha < 1` the operator acts (up to a constant) as
//!
//! ```text
//! K f(x) = int sgn(y) |y|^{-1-alpha} (f(x) - f(x - y)) dy
//! ```
//!
//! Splitting at radius `delta` and integrating the inner part by parts gives
//! a boundary term, an integrable inner term `|y|^{-alpha} f'(x - y)` and an
//! outer term. The outer integral runs over the whole line: the part beyond
//! the half period is summed over periodic images in closed form with the
//! Hurwitz zeta function, so the result is the exact whole-line integral of
//! the periodic field.
//!
//! The constant relating `K` to the spectral symbol is fitted by
//! [`calibration_constant`].

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{hurwitz_zeta, integrate, Tolerance};
use crate::spectral::{dispersion_apply, spectral_derivative, Alpha, GridFunction, Interpolant};

/// Per-piece absolute quadrature tolerance, relative to `||f||_inf`.
pub const PIECE_TOLERANCE: f64 = 1e-10;

/// The three pieces of a split kernel evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitEval {
    pub delta: f64,
    /// `(1/alpha) delta^{-alpha} (f(x - delta) - f(x + delta))`
    pub boundary_term: f64,
    /// `(1/alpha) int_{|y|<delta} |y|^{-alpha} f'(x - y) dy`
    pub inner_term: f64,
    /// `int_{|y|>delta} sgn(y) |y|^{-1-alpha} (f(x) - f(x - y)) dy` over the whole line
    pub outer_term: f64,
    pub total: f64,
    /// Contribution of `|y| > L/2` (already included in `outer_term`).
    pub outer_tail: f64,
    /// A priori bound `4 ||f||_inf / (alpha (L/2)^alpha)` on the part beyond the half period.
    pub tail_bound: f64,
    /// Summed quadrature error estimate of the three integrals.
    pub quadrature_error: f64,
}

/// Split evaluation for arbitrary `f` and its derivative `df` with period `period`.
///
/// `f_sup` sets the absolute tolerance scale and the tail bound.
#[allow(clippy::too_many_arguments)]
pub fn split_kernel(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    period: f64,
    f_sup: f64,
    alpha: f64,
    x: f64,
    delta: f64,
) -> Result<SplitEval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("kernel form needs 0 < alpha < 1, got {alpha}"));
    }
    if !(delta > 0.0 && delta < period / 4.0) {
        return domain(format!("split radius {delta} must lie in (0, L/4) with L = {period}"));
    }
    let tol = Tolerance {
        abs: PIECE_TOLERANCE * f_sup.max(f64::MIN_POSITIVE),
        rel: 1e-13,
        max_intervals: 4000,
    };
    let half = 0.5 * period;

    let boundary_term = delta.powf(-alpha) / alpha * (f(x - delta) - f(x + delta));

    // y = s^{1/(1-alpha)} turns |y|^{-alpha} dy into ds / (1 - alpha)
    let expo = 1.0 / (1.0 - alpha);
    let inner = integrate(
        |s| {
            let y = s.powf(expo);
            df(x - y) + df(x + y)
        },
        0.0,
        delta.powf(1.0 - alpha),
        tol,
    )?;
    let inner_term = inner.value / (alpha * (1.0 - alpha));

    // log substitution y = e^w on [delta, L/2]
    let near = integrate(
        |w| {
            let y = w.exp();
            y.powf(-alpha) * (f(x + y) - f(x - y))
        },
        delta.ln(),
        half.ln(),
        tol,
    )?;

    // y = L/2 + jL + s, summed over j in closed form
    let tail_scale = period.powf(-1.0 - alpha);
    let tail = integrate(
        |s| {
            let g = f(x + half + s) - f(x - half - s);
            g * hurwitz_zeta(1.0 + alpha, 0.5 + s / period)
        },
        0.0,
        period,
        Tolerance {
            abs: tol.abs / tail_scale,
            ..tol
        },
    )?;
    let outer_tail = tail_scale * tail.value;
    let outer_term = near.value + outer_tail;

    Ok(SplitEval {
        delta,
        boundary_term,
        inner_term,
        outer_term,
        total: boundary_term + inner_term + outer_term,
        outer_tail,
        tail_bound: 4.0 * f_sup / (alpha * half.powf(alpha)),
        quadrature_error: inner.error / (alpha * (1.0 - alpha)) + near.error + tail_scale * tail.error,
    })
}

/// Precomputed interpolants of `d^n u` and `d^{n+1} u` for repeated kernel evaluations.
pub struct KernelEvaluator {
    alpha: Alpha,
    period: f64,
    f: Interpolant,
    df: Interpolant,
    f_sup: f64,
    df_sup: f64,
}

impl KernelEvaluator {
    pub fn new(u: &GridFunction, alpha: Alpha, n: usize) -> Result<Self> {
        if !alpha.is_subunit() {
            return domain(format!("kernel form needs 0 < alpha < 1, got {alpha}"));
        }
        let fn_ = spectral_derivative(u, n)?;
        let dfn = spectral_derivative(u, n + 1)?;
        Ok(Self {
            alpha,
            period: u.domain_length(),
            f_sup: fn_.sup_refined().1,
            df_sup: dfn.sup_refined().1,
            f: fn_.interpolant(),
            df: dfn.interpolant(),
        })
    }

    pub fn eval(&self, x: f64, delta: f64) -> Result<SplitEval> {
        split_kernel(
            |y| self.f.eval(y),
            |y| self.df.eval(y),
            self.period,
            self.f_sup,
            self.alpha.value(),
            x,
            delta,
        )
    }

    /// `||d^n u||_inf`, refined off-grid.
    pub fn f_sup(&self) -> f64 {
        self.f_sup
    }

    /// `||d^{n+1} u||_inf`, refined off-grid.
    pub fn df_sup(&self) -> f64 {
        self.df_sup
    }
}

/// Evaluates `K_n(x)` for the field `u` by split quadrature at radius `delta`.
pub fn kernel_apply_direct(u: &GridFunction, alpha: Alpha, n: usize, x: f64, delta: f64) -> Result<SplitEval> {
    KernelEvaluator::new(u, alpha, n)?.eval(x, delta)
}

/// Maximum relative spread tolerated across calibration modes.
pub const CALIBRATION_LIMIT: f64 = 1e-6;

fn calibration_cache() -> &'static Mutex<HashMap<u64, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Ratio between the spectral operator and the raw kernel integral.
///
/// Least-squares fit of `spectral = c * direct` over single modes
/// `sin(kx)`, `k = 1..8`, sampled at two points. Cached per `alpha`.
///
/// With the symbol `-i sgn(xi)|xi|^alpha` the constant is negative,
/// `c = -alpha / (2 Gamma(1 - alpha) sin(pi alpha / 2))`.
pub fn calibration_constant(alpha: Alpha) -> Result<f64> {
    if !alpha.is_subunit() {
        return domain(format!("calibration needs 0 < alpha < 1, got {alpha}"));
    }
    let key = alpha.value().to_bits();
    if let Some(&c) = calibration_cache().lock().expect("calibration cache poisoned").get(&key) {
        return Ok(c);
    }
    let c = fit_calibration(alpha)?;
    calibration_cache().lock().expect("calibration cache poisoned").insert(key, c);
    Ok(c)
}

fn fit_calibration(alpha: Alpha) -> Result<f64> {
    let period = 2.0 * PI;
    let delta = 0.5;
    let mut pairs = Vec::new();
    for k in 1..=8 {
        let kf = k as f64;
        let u = GridFunction::from_fn(period, 32, |x| (kf * x).sin())?;
        let spectral = dispersion_apply(&u, alpha)?.interpolant();
        let direct = KernelEvaluator::new(&u, alpha, 0)?;
        for &x in &[0.0, 0.37] {
            pairs.push((direct.eval(x, delta)?.total, spectral.eval(x)));
        }
    }
    let num: f64 = pairs.iter().map(|(d, s)| d * s).sum();
    let den: f64 = pairs.iter().map(|(d, _)| d * d).sum();
    let c = num / den;
    let scale = pairs.iter().fold(0.0_f64, |m, (_, s)| m.max(s.abs()));
    let residual = pairs.iter().fold(0.0_f64, |m, (d, s)| m.max((s - c * d).abs())) / scale;
    if !(c.is_finite() && residual <= CALIBRATION_LIMIT) {
        return Err(Error::CalibrationFailed {
            residual,
            limit: CALIBRATION_LIMIT,
        });
    }
    Ok(c)
}

/// Upper bound `(6/alpha) delta^{-alpha} ||v_n|| + 2/(alpha(1-alpha)) delta^{1-alpha} ||v_{n+1}||`.
pub fn kn_bound(alpha: Alpha, delta: f64, vn_sup: f64, vn1_sup: f64) -> f64 {
    let a = alpha.value();
    6.0 / a * delta.powf(-a) * vn_sup + 2.0 / (a * (1.0 - a)) * delta.powf(1.0 - a) * vn1_sup
}

/// Minimizer `3 alpha ||v_n|| / ||v_{n+1}||` of [`kn_bound`] over `delta`.
pub fn kn_bound_optimal_delta(alpha: Alpha, vn_sup: f64, vn1_sup: f64) -> f64 {
    3.0 * alpha.value() * vn_sup / vn1_sup
}

/// Hoelder variant for `n = 1`:
/// `(6/alpha) delta^{-alpha} ||v_1||_inf + (1/alpha) sqrt(2/(1-2 alpha)) delta^{1/2-alpha} ||v_2||_{L^2}`.
pub fn k1_bound_holder(alpha: Alpha, delta: f64, v1_sup: f64, v2_l2: f64) -> Result<f64> {
    let a = alpha.value();
    if !alpha.below_half() {
        return domain(format!("Hoelder bound needs alpha < 1/2, got {a}"));
    }
    Ok(6.0 / a * delta.powf(-a) * v1_sup + (2.0 / (1.0 - 2.0 * a)).sqrt() / a * delta.powf(0.5 - a) * v2_l2)
}

/// Split radius choices along the blow-up: `delta = q` for `n = 0`,
/// `q^sigma` for `n = 1` and `n^{-1/alpha} q^sigma` for `n >= 2`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DeltaPolicy {
    pub alpha: Alpha,
    pub sigma: f64,
}

impl DeltaPolicy {
    pub fn delta(&self, n: usize, q: f64) -> f64 {
        match n {
            0 => q,
            1 => q.powf(self.sigma),
            _ => (n as f64).powf(-1.0 / self.alpha.value()) * q.powf(self.sigma),
        }
    }
}
