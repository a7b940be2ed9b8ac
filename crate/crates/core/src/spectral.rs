//! Periodic grid functions, Fourier multipliers and trigonometric interpolation.
//!
//! A [`GridFunction`] is a real field sampled on `n_points` equispaced nodes of
//! the torus `[0, L)`. Its Fourier-series coefficients are computed on first
//! use and cached, so the value and coefficient views always agree.
//!
//! Coefficients are normalized as Fourier-series coefficients,
//! `u(x_j) = sum_k c_k exp(i xi_k x_j)` with `xi_k = 2 pi k / L`, and are kept
//! exactly conjugate-symmetric.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const MIN_POINTS: usize = 16;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized forward DFT (`exp(-i ...)` kernel).
pub(crate) fn fft_forward_in_place(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place unnormalized inverse DFT (`exp(+i ...)` kernel).
pub(crate) fn fft_inverse_in_place(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

/// Signed mode number of FFT slot `j`; the Nyquist slot maps to `+n/2`.
#[inline]
pub fn signed_mode(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Forces exact conjugate symmetry: real mean and Nyquist modes, `c_{-k} = conj(c_k)`.
pub(crate) fn symmetrize(coeffs: &mut [Complex64]) {
    let n = coeffs.len();
    coeffs[0].im = 0.0;
    coeffs[n / 2].im = 0.0;
    for j in 1..n / 2 {
        let a = coeffs[j];
        let b = coeffs[n - j].conj();
        let avg = (a + b) * 0.5;
        coeffs[j] = avg;
        coeffs[n - j] = avg.conj();
    }
}

/// `|x|^p`, using repeated multiplication for integer powers so that integer
/// orders agree bit-for-bit with polynomial symbols.
#[inline]
pub(crate) fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p.fract() == 0.0 && p.abs() <= 64.0 {
        a.powi(p as i32)
    } else {
        a.powf(p)
    }
}

/// `(i xi)^order`.
#[inline]
pub(crate) fn ik_pow(xi: f64, order: usize) -> Complex64 {
    let p = xi.powi(order as i32);
    match order % 4 {
        0 => Complex64::new(p, 0.0),
        1 => Complex64::new(0.0, p),
        2 => Complex64::new(-p, 0.0),
        _ => Complex64::new(0.0, -p),
    }
}

/// The dispersion exponent, restricted to `(0, 3]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0 && value <= 3.0) {
            return domain(format!("alpha must lie in (0, 3], got {value}"));
        }
        Ok(Self(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `0 < alpha < 1`: the kernel representation is available.
    pub fn is_subunit(self) -> bool {
        self.0 < 1.0
    }

    pub fn below_half(self) -> bool {
        self.0 < 0.5
    }

    pub fn below_third(self) -> bool {
        self.0 < 1.0 / 3.0
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Alpha::new(v)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Symbol of the dispersion operator, `-i sgn(xi) |xi|^alpha`.
///
/// With `alpha = 3` this is the symbol of the third derivative.
#[inline]
pub fn dispersion_symbol(xi: f64, alpha: f64) -> Complex64 {
    if xi == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, -xi.signum() * abs_pow(xi, alpha))
    }
}

/// Real periodic field on a uniform grid together with its spectral coefficients.
#[derive(Clone)]
pub struct GridFunction {
    domain_length: f64,
    values: Vec<f64>,
    coeffs: OnceLock<Vec<Complex64>>,
}

impl fmt::Debug for GridFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFunction")
            .field("domain_length", &self.domain_length)
            .field("n_points", &self.values.len())
            .finish()
    }
}

fn check_grid(domain_length: f64, n: usize) -> Result<()> {
    if !(domain_length.is_finite() && domain_length > 0.0) {
        return domain(format!("domain length must be positive, got {domain_length}"));
    }
    if n < MIN_POINTS || !n.is_power_of_two() {
        return domain(format!("n_points must be a power of two >= {MIN_POINTS}, got {n}"));
    }
    Ok(())
}

impl GridFunction {
    pub fn new(domain_length: f64, values: Vec<f64>) -> Result<Self> {
        check_grid(domain_length, values.len())?;
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow {
                context: format!("non-finite grid value at node {j}"),
            });
        }
        Ok(Self {
            domain_length,
            values,
            coeffs: OnceLock::new(),
        })
    }

    /// Samples `f` at the grid nodes `x_j = j L / n`.
    pub fn from_fn(domain_length: f64, n_points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        check_grid(domain_length, n_points)?;
        let dx = domain_length / n_points as f64;
        Self::new(domain_length, (0..n_points).map(|j| f(j as f64 * dx)).collect())
    }

    /// Builds a field from Fourier-series coefficients (FFT slot order).
    pub fn from_coeffs(domain_length: f64, mut coeffs: Vec<Complex64>) -> Result<Self> {
        check_grid(domain_length, coeffs.len())?;
        if let Some(j) = coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NumericOverflow {
                context: format!("non-finite coefficient at mode {}", signed_mode(j, coeffs.len())),
            });
        }
        symmetrize(&mut coeffs);
        let mut buf = coeffs.clone();
        fft_inverse_in_place(&mut buf);
        let values: Vec<f64> = buf.iter().map(|c| c.re).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow {
                context: "inverse transform produced non-finite values".into(),
            });
        }
        let cell = OnceLock::new();
        let _ = cell.set(coeffs);
        Ok(Self {
            domain_length,
            values,
            coeffs: cell,
        })
    }

    pub fn zeros(domain_length: f64, n_points: usize) -> Result<Self> {
        Self::from_fn(domain_length, n_points, |_| 0.0)
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.domain_length / self.values.len() as f64
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points()).map(|j| self.node(j)).collect()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Fourier-series coefficients, computed on first access.
    pub fn coeffs(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| {
            let n = self.values.len();
            let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft_forward_in_place(&mut buf);
            let scale = 1.0 / n as f64;
            for c in buf.iter_mut() {
                *c *= scale;
            }
            symmetrize(&mut buf);
            buf
        })
    }

    /// Wavenumber `2 pi k / L` of FFT slot `j`.
    #[inline]
    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * PI * signed_mode(j, self.n_points()) as f64 / self.domain_length
    }

    /// Largest resolved wavenumber (Nyquist).
    pub fn max_wavenumber(&self) -> f64 {
        PI * self.n_points() as f64 / self.domain_length
    }

    /// Applies a Fourier multiplier given slot-wise as `f(mode, xi, c)`.
    pub fn map_modes(&self, f: impl Fn(i64, f64, Complex64) -> Complex64) -> Result<Self> {
        let n = self.n_points();
        let out: Vec<Complex64> = self
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, &c)| f(signed_mode(j, n), self.wavenumber(j), c))
            .collect();
        Self::from_coeffs(self.domain_length, out)
    }

    /// `a * self + b * other`, pointwise. Grids must match.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Self::new(
            self.domain_length,
            self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        )
    }

    pub fn scaled(&self, a: f64) -> Result<Self> {
        Self::new(self.domain_length, self.values.iter().map(|v| a * v).collect())
    }

    pub(crate) fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.n_points() != other.n_points() || self.domain_length != other.domain_length {
            return domain("grid functions live on different grids");
        }
        Ok(())
    }

    /// Max of `|u|` over the grid nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.coeffs()[0].re
    }

    /// `||u||_{L^2(0, L)}` by Parseval.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.coeffs().iter().map(|c| c.norm_sqr()).sum();
        (self.domain_length * s).sqrt()
    }

    /// `||d^order u / dx^order||_{L^2}` by Parseval.
    pub fn derivative_l2_norm(&self, order: usize) -> f64 {
        let s: f64 = self
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, c)| self.wavenumber(j).powi(2 * order as i32) * c.norm_sqr())
            .sum();
        (self.domain_length * s).sqrt()
    }

    /// Inhomogeneous Sobolev norm `(L sum (1 + xi^2)^s |c|^2)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let sum: f64 = self
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, c)| (1.0 + self.wavenumber(j).powi(2)).powf(s) * c.norm_sqr())
            .sum();
        (self.domain_length * sum).sqrt()
    }

    /// Fraction of the spectral energy in the top third of the active band.
    ///
    /// With dealiasing the active band is `|k| <= n/3`, otherwise `|k| <= n/2`.
    pub fn high_band_fraction(&self, dealias: bool) -> f64 {
        let n = self.n_points();
        let top = if dealias { n / 3 } else { n / 2 };
        let lower = 2 * top / 3;
        let mut total = 0.0;
        let mut high = 0.0;
        for (j, c) in self.coeffs().iter().enumerate() {
            let k = signed_mode(j, n).unsigned_abs() as usize;
            let e = c.norm_sqr();
            total += e;
            if k > lower && k <= top {
                high += e;
            }
        }
        if total > 0.0 {
            high / total
        } else {
            0.0
        }
    }

    /// Trigonometric zero-padding to `new_n >= n_points` nodes.
    pub fn padded(&self, new_n: usize) -> Result<Self> {
        let n = self.n_points();
        if new_n < n || !new_n.is_power_of_two() {
            return domain(format!("cannot pad {n} points to {new_n}"));
        }
        if new_n == n {
            return Ok(self.clone());
        }
        let c = self.coeffs();
        let mut out = vec![Complex64::new(0.0, 0.0); new_n];
        for j in 0..n {
            let k = signed_mode(j, n);
            if k.unsigned_abs() as usize == n / 2 {
                // split the Nyquist mode evenly between +n/2 and -n/2
                let half = c[j] * 0.5;
                out[n / 2] = half;
                out[new_n - n / 2] = half;
            } else if k >= 0 {
                out[k as usize] = c[j];
            } else {
                out[(new_n as i64 + k) as usize] = c[j];
            }
        }
        Self::from_coeffs(self.domain_length, out)
    }

    pub fn interpolant(&self) -> Interpolant {
        Interpolant::new(self)
    }

    /// Grid minimum refined to sub-grid accuracy by golden-section search
    /// on the trigonometric interpolant. Returns `(x, u(x))`.
    pub fn min_refined(&self) -> (f64, f64) {
        let j = argmin(&self.values);
        let interp = self.interpolant();
        refine_extremum(&interp, self.node(j), self.dx(), self.values[j], |v| v)
    }

    /// Grid maximum of `|u|` refined on the interpolant. Returns `(x, |u(x)|)`.
    pub fn sup_refined(&self) -> (f64, f64) {
        let j = argmin_by(&self.values, |v| -v.abs());
        let interp = self.interpolant();
        let (x, negabs) = refine_extremum(&interp, self.node(j), self.dx(), -self.values[j].abs(), |v| -v.abs());
        (x, -negabs)
    }
}

fn argmin(v: &[f64]) -> usize {
    argmin_by(v, |x| x)
}

fn argmin_by(v: &[f64], key: impl Fn(f64) -> f64) -> usize {
    let mut best = 0;
    let mut best_val = key(v[0]);
    for (j, &x) in v.iter().enumerate().skip(1) {
        let k = key(x);
        if k < best_val {
            best = j;
            best_val = k;
        }
    }
    best
}

const GOLDEN_TOL: f64 = 1e-10;

/// Golden-section minimization of `key(interp(x))` on `[x0 - dx, x0 + dx]`.
fn refine_extremum(
    interp: &Interpolant,
    x0: f64,
    dx: f64,
    grid_val: f64,
    key: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let g = |x: f64| key(interp.eval(x));
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (x0 - dx, x0 + dx);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..200 {
        if (b - a).abs() < GOLDEN_TOL {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = g(d);
        }
    }
    let xm = 0.5 * (a + b);
    let fm = g(xm);
    if fm <= grid_val {
        (xm, fm)
    } else {
        (x0, grid_val)
    }
}

/// Precomputed real-form trigonometric interpolant of a [`GridFunction`].
#[derive(Clone, Debug)]
pub struct Interpolant {
    domain_length: f64,
    mean: f64,
    // 2 Re c_k and -2 Im c_k for k = 1..n/2 (Nyquist term halved, sine part dropped)
    cos_coef: Vec<f64>,
    sin_coef: Vec<f64>,
}

impl Interpolant {
    fn new(u: &GridFunction) -> Self {
        let n = u.n_points();
        let c = u.coeffs();
        let mut cos_coef = Vec::with_capacity(n / 2);
        let mut sin_coef = Vec::with_capacity(n / 2);
        for k in 1..n / 2 {
            cos_coef.push(2.0 * c[k].re);
            sin_coef.push(-2.0 * c[k].im);
        }
        cos_coef.push(c[n / 2].re);
        sin_coef.push(0.0);
        Self {
            domain_length: u.domain_length(),
            mean: c[0].re,
            cos_coef,
            sin_coef,
        }
    }

    /// Evaluates the interpolant at an arbitrary (periodically extended) `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let theta = 2.0 * PI * (x / self.domain_length).rem_euclid(1.0);
        let (s1, c1) = theta.sin_cos();
        let mut sum = self.mean;
        let (mut ck, mut sk) = (1.0_f64, 0.0_f64);
        for (i, (a, b)) in self.cos_coef.iter().zip(&self.sin_coef).enumerate() {
            let k = i + 1;
            if k % 32 == 0 {
                // re-anchor the rotation recurrence to keep its drift at round-off
                let (s, c) = (k as f64 * theta).sin_cos();
                ck = c;
                sk = s;
            } else {
                let nc = ck * c1 - sk * s1;
                sk = sk * c1 + ck * s1;
                ck = nc;
            }
            sum += a * ck + b * sk;
        }
        sum
    }
}

/// Applies the dispersion operator: multiplies `u_hat(xi)` by `-i sgn(xi) |xi|^alpha`.
///
/// The Nyquist mode is dropped (odd symbol on a real field).
pub fn dispersion_apply(u: &GridFunction, alpha: Alpha) -> Result<GridFunction> {
    let n = u.n_points() as i64;
    let a = alpha.value();
    u.map_modes(|k, xi, c| {
        if k == n / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            c * dispersion_symbol(xi, a)
        }
    })
}

/// `d^order u / dx^order` by multiplying coefficients with `(i xi)^order`.
///
/// Odd orders drop the Nyquist mode. Orders above `n_points / 4` are refused.
pub fn spectral_derivative(u: &GridFunction, order: usize) -> Result<GridFunction> {
    if order == 0 {
        return Ok(u.clone());
    }
    let n = u.n_points();
    if order > n / 4 {
        return Err(Error::IllConditioned {
            order,
            amplification: u.max_wavenumber().powi(order as i32),
        });
    }
    let nyq = (n / 2) as i64;
    let odd = order % 2 == 1;
    u.map_modes(|k, xi, c| {
        if odd && k == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            c * ik_pow(xi, order)
        }
    })
}

/// Trigonometric interpolation of `u` at `x`.
pub fn interpolate(u: &GridFunction, x: f64) -> f64 {
    u.interpolant().eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(k: f64) -> GridFunction {
        GridFunction::from_fn(2.0 * PI, 64, |x| (k * x).cos()).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridFunction::from_fn(1.0, 12, |_| 0.0).is_err());
        assert!(GridFunction::from_fn(1.0, 8, |_| 0.0).is_err());
        assert!(GridFunction::from_fn(-1.0, 16, |_| 0.0).is_err());
        assert!(GridFunction::new(1.0, vec![f64::NAN; 16]).is_err());
    }

    #[test]
    fn alpha_range() {
        assert!(Alpha::new(0.0).is_err());
        assert!(Alpha::new(3.5).is_err());
        assert!(Alpha::new(f64::NAN).is_err());
        let a = Alpha::new(0.3).unwrap();
        assert!(a.is_subunit() && a.below_half() && a.below_third());
        assert!(!Alpha::new(0.4).unwrap().below_third());
        assert!(!Alpha::new(3.0).unwrap().is_subunit());
    }

    #[test]
    fn derivative_of_cosines() {
        let d1 = spectral_derivative(&cosine(1.0), 1).unwrap();
        let d2 = spectral_derivative(&cosine(2.0), 2).unwrap();
        for (j, x) in d1.nodes().into_iter().enumerate() {
            assert!((d1.values()[j] + x.sin()).abs() < 1e-13);
            assert!((d2.values()[j] + 4.0 * (2.0 * x).cos()).abs() < 1e-12);
        }
        let d0 = spectral_derivative(&cosine(3.0), 0).unwrap();
        assert_eq!(d0.values(), cosine(3.0).values());
    }

    #[test]
    fn derivative_order_guard() {
        let u = cosine(1.0);
        match spectral_derivative(&u, 17) {
            Err(Error::IllConditioned { order, amplification }) => {
                assert_eq!(order, 17);
                assert!(amplification > 1e20);
            }
            other => panic!("expected ill-conditioned error, got {other:?}"),
        }
        assert!(spectral_derivative(&u, 16).is_ok());
    }

    #[test]
    fn dispersion_single_mode() {
        for &a in &[0.2, 0.5, 1.0, 2.0, 3.0] {
            let alpha = Alpha::new(a).unwrap();
            for k in 1..=8 {
                let out = dispersion_apply(&cosine(k as f64), alpha).unwrap();
                let amp = (k as f64).powf(a);
                for (j, x) in out.nodes().into_iter().enumerate() {
                    let exact = amp * (k as f64 * x).sin();
                    assert!((out.values()[j] - exact).abs() <= 1e-10 * amp);
                }
            }
        }
    }

    #[test]
    fn kdv_limit_is_third_derivative_bitwise() {
        let u = GridFunction::from_fn(5.0, 64, |x| (2.0 * PI * x / 5.0).cos() + 0.3 * (4.0 * PI * x / 5.0).sin())
            .unwrap();
        let disp = dispersion_apply(&u, Alpha::new(3.0).unwrap()).unwrap();
        let d3 = spectral_derivative(&u, 3).unwrap();
        assert_eq!(disp.coeffs(), d3.coeffs());
    }

    #[test]
    fn alpha_one_is_minus_first_derivative_bitwise() {
        let u = GridFunction::from_fn(3.0, 32, |x| (x * 2.0 * PI / 3.0).sin().exp()).unwrap();
        let disp = dispersion_apply(&u, Alpha::new(1.0).unwrap()).unwrap();
        let d1 = spectral_derivative(&u, 1).unwrap();
        for (a, b) in disp.coeffs().iter().zip(d1.coeffs()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn mean_mode_untouched_by_dispersion() {
        let u = GridFunction::from_fn(2.0 * PI, 32, |x| 2.5 + x.cos()).unwrap();
        let out = dispersion_apply(&u, Alpha::new(0.7).unwrap()).unwrap();
        assert_eq!(out.coeffs()[0].re, 0.0);
        assert!((u.mean() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn interpolation_basics() {
        let u = cosine(1.0);
        assert!((interpolate(&u, PI / 3.0) - 0.5).abs() < 1e-14);
        let interp = u.interpolant();
        for (j, x) in u.nodes().into_iter().enumerate() {
            assert!((interp.eval(x) - u.values()[j]).abs() < 1e-12);
        }
        // periodic
        assert!((interp.eval(0.7) - interp.eval(0.7 + 2.0 * PI)).abs() < 1e-13);
        assert!((interp.eval(0.7) - interp.eval(0.7 - 4.0 * PI)).abs() < 1e-13);
    }

    #[test]
    fn padding_preserves_the_interpolant() {
        let u = GridFunction::from_fn(2.0 * PI, 32, |x| (x.sin()).exp() + (15.0 * x).cos()).unwrap();
        let p = u.padded(128).unwrap();
        let (iu, ip) = (u.interpolant(), p.interpolant());
        for i in 0..50 {
            let x = 0.123 * i as f64;
            assert!((iu.eval(x) - ip.eval(x)).abs() < 1e-12);
        }
        assert!((u.l2_norm() - p.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn refined_minimum_of_shifted_sine() {
        let u = GridFunction::from_fn(2.0 * PI, 32, |x| -(x - 0.05).cos()).unwrap();
        let (x, v) = u.min_refined();
        assert!((x - 0.05).abs() < 1e-7);
        assert!((v + 1.0).abs() < 1e-13);
        let (_, s) = u.sup_refined();
        assert!((s - 1.0).abs() < 1e-13);
    }

    #[test]
    fn norms_of_sine() {
        let u = GridFunction::from_fn(2.0 * PI, 32, |x| x.sin()).unwrap();
        assert!((u.l2_norm() - PI.sqrt()).abs() < 1e-13);
        assert!((u.derivative_l2_norm(2) - PI.sqrt()).abs() < 1e-13);
        assert!((u.sobolev_norm(1.0) - (2.0 * PI).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn high_band_fraction_detects_energy() {
        let smooth = cosine(1.0);
        assert!(smooth.high_band_fraction(true) < 1e-25);
        let rough = GridFunction::from_fn(2.0 * PI, 64, |x| x.cos() + (20.0 * x).cos()).unwrap();
        assert!((rough.high_band_fraction(true) - 0.5).abs() < 1e-12);
        assert!(rough.high_band_fraction(false) < 1e-25);
    }
}
