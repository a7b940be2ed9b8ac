use std::path::PathBuf;

use whitham_core::hypothesis::{
    amplitude_threshold, check_theorem, datum_factory, default_constants, AmplitudeThreshold, Constants, DatumKind,
    HypothesisReport, Theorem,
};
use whitham_core::spectral::Alpha;

use crate::{check_eps, CmdResult};

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub datum: DatumKind,
    pub amplitude: f64,
    pub width: f64,
    pub domain_length: f64,
    pub n_points: usize,
    pub alpha: f64,
    pub eps: f64,
    pub theorem: Theorem,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub n_max: usize,
    pub bisect: bool,
    pub json: Option<PathBuf>,
}

pub struct CheckOutcome {
    pub report: HypothesisReport,
    pub threshold: Option<AmplitudeThreshold>,
}

/// The steepness inequalities the amplitude bisection targets.
pub fn steepness_inequalities(theorem: Theorem) -> &'static [&'static str] {
    match theorem {
        Theorem::Gevrey => &["steepness.norm", "steepness.ratio", "steepness.local"],
        Theorem::Sobolev => &["steepness.norm", "steepness.ratio"],
    }
}

pub fn check(opts: &CheckOptions) -> CmdResult<CheckOutcome> {
    check_eps(opts.eps)?;
    let alpha = Alpha::new(opts.alpha)?;
    let phi = datum_factory(opts.datum, opts.amplitude, opts.width, opts.domain_length, opts.n_points)?;
    let defaults = default_constants(&phi, alpha, opts.eps, opts.theorem, opts.n_max)?;
    let constants = Constants {
        c0: opts.c0.unwrap_or(defaults.c0),
        c1: opts.c1.unwrap_or(defaults.c1),
        c2: opts.c2.unwrap_or(defaults.c2),
    };
    let report = check_theorem(opts.theorem, &phi, alpha, opts.eps, constants, opts.n_max)?;
    let threshold = if opts.bisect {
        amplitude_threshold(&phi, alpha, opts.eps, opts.theorem, steepness_inequalities(opts.theorem), opts.n_max)?
    } else {
        None
    };
    if let Some(path) = &opts.json {
        let doc = serde_json::json!({ "report": report, "threshold": threshold });
        std::fs::write(path, serde_json::to_vec_pretty(&doc)?)?;
    }
    Ok(CheckOutcome { report, threshold })
}
