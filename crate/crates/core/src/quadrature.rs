//! Adaptive Gauss-Kronrod quadrature and the Hurwitz zeta function.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 15-point Kronrod nodes (non-negative half) and weights, with the embedded
// 7-point Gauss weights for the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive G7/K15 integration of `f` over `[a, b]`.
///
/// Bisects the segment with the largest error estimate until the summed
/// estimate is below `max(tol.abs, tol.rel * |I|)`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: Tolerance) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut evaluations = 15;
    let mut total = v;
    let mut err = e;
    while err > tol.abs.max(tol.rel * total.abs()) {
        if !err.is_finite() || heap.len() >= tol.max_intervals {
            return Err(Error::QuadratureNonConvergence {
                achieved: err,
                requested: tol.abs.max(tol.rel * total.abs()),
            });
        }
        let seg = heap.pop().expect("heap is never empty");
        let m = 0.5 * (seg.a + seg.b);
        let (v1, e1) = gk15(&f, seg.a, m);
        let (v2, e2) = gk15(&f, m, seg.b);
        evaluations += 30;
        total += v1 + v2 - seg.value;
        err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: m, value: v1, error: e1 });
        heap.push(Segment { a: m, b: seg.b, value: v2, error: e2 });
        // resum occasionally so the running totals do not drift
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(Quadrature { value, error, evaluations })
}

// B_{2k} / (2k)! for k = 1..=9
const BERNOULLI_OVER_FACT: [f64; 9] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
    -3617.0 / 10_670_622_842_880_000.0,
    43_867.0 / 5_109_094_217_170_944_000.0,
];

/// Hurwitz zeta `sum_{j >= 0} (j + a)^{-s}` for `s > 1`, `a > 0`, by
/// Euler-Maclaurin summation.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    debug_assert!(s > 1.0 && a > 0.0);
    const DIRECT: usize = 12;
    let mut sum = 0.0;
    for j in 0..DIRECT {
        sum += (a + j as f64).powf(-s);
    }
    let w = a + DIRECT as f64;
    sum += w.powf(1.0 - s) / (s - 1.0) + 0.5 * w.powf(-s);
    // rising factorial s (s+1) ... (s + 2k - 2) times w^{-s-2k+1}
    let mut rising = s;
    let mut wpow = w.powf(-s - 1.0);
    let w2 = 1.0 / (w * w);
    for (k, coef) in BERNOULLI_OVER_FACT.iter().enumerate() {
        let term = coef * rising * wpow;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        let k1 = (2 * k + 2) as f64;
        rising *= (s + k1 - 1.0) * (s + k1);
        wpow *= w2;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrates_polynomials_exactly() {
        let q = integrate(|x| x.powi(5) - 2.0 * x, -1.0, 2.0, Tolerance::default()).unwrap();
        assert!((q.value - (64.0 / 6.0 - 1.0 / 6.0 - 3.0)).abs() < 1e-13);
    }

    #[test]
    fn integrates_endpoint_singularity() {
        // int_0^1 x^{-1/2} = 2
        let q = integrate(|x| x.powf(-0.5), 0.0, 1.0, Tolerance { abs: 1e-9, rel: 1e-12, max_intervals: 10_000 }).unwrap();
        assert!((q.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn reports_non_convergence() {
        let tol = Tolerance { abs: 1e-14, rel: 0.0, max_intervals: 4 };
        match integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, tol) {
            Err(Error::QuadratureNonConvergence { achieved, .. }) => assert!(achieved > 1e-14),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn zeta_known_values() {
        assert!((hurwitz_zeta(2.0, 1.0) - PI * PI / 6.0).abs() < 1e-14);
        // zeta(2, 1/2) = pi^2 / 2
        assert!((hurwitz_zeta(2.0, 0.5) - PI * PI / 2.0).abs() < 1e-13);
        // zeta(3/2) = 2.612375348685488...
        assert!((hurwitz_zeta(1.5, 1.0) - 2.612_375_348_685_488).abs() < 1e-13);
    }

    #[test]
    fn zeta_shift_identity() {
        // zeta(s, a) = a^{-s} + zeta(s, a + 1)
        for &s in &[1.05, 1.35, 1.8] {
            for &a in &[0.5, 0.77, 1.3] {
                let lhs = hurwitz_zeta(s, a);
                let rhs = a.powf(-s) + hurwitz_zeta(s, a + 1.0);
                assert!((lhs - rhs).abs() < 1e-12 * lhs.abs());
            }
        }
    }
}
