//! Run configuration: a flat JSON object holding every solver field plus the
//! initial datum and the detection tolerance.

use std::f64::consts::PI;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use whitham_core::hypothesis::{datum_factory, DatumKind};
use whitham_core::solver::SolverConfig;
use whitham_core::spectral::GridFunction;

use crate::{check_eps, CmdResult, Failure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    ScaledSine,
    BumpDerivative,
    /// Band-limited random field drawn from `seed`.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    #[serde(default = "default_kind")]
    pub initial: InitialKind,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Bump width; ignored by the other kinds.
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_modes")]
    pub modes: usize,
}

fn default_kind() -> InitialKind {
    InitialKind::ScaledSine
}

fn one() -> f64 {
    1.0
}

fn default_modes() -> usize {
    8
}

fn default_eps() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Extras {
    #[serde(default = "default_eps")]
    eps: f64,
    #[serde(default)]
    refinement_check: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub solver: SolverConfig,
    #[serde(flatten)]
    pub datum: InitialData,
    pub eps: f64,
    /// Repeat the run on a twice-finer grid and require agreement.
    pub refinement_check: bool,
}

const DATUM_KEYS: [&str; 5] = ["initial", "amplitude", "width", "seed", "modes"];
const EXTRA_KEYS: [&str; 2] = ["eps", "refinement_check"];

impl RunConfig {
    pub fn from_json(text: &str) -> CmdResult<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Failure::usage(format!("config is not valid JSON: {e}")))?;
        let Value::Object(mut all) = value else {
            return Err(Failure::usage("config must be a JSON object"));
        };
        let mut take = |keys: &[&str]| -> Map<String, Value> {
            keys.iter().filter_map(|k| all.remove(*k).map(|v| (k.to_string(), v))).collect()
        };
        let datum = take(&DATUM_KEYS);
        let extras = take(&EXTRA_KEYS);
        let field_err = |e: serde_json::Error| Failure::usage(format!("config: {e}"));
        let solver: SolverConfig = serde_json::from_value(Value::Object(all)).map_err(field_err)?;
        let datum: InitialData = serde_json::from_value(Value::Object(datum)).map_err(field_err)?;
        let extras: Extras = serde_json::from_value(Value::Object(extras)).map_err(field_err)?;
        let cfg = Self {
            solver,
            datum,
            eps: extras.eps,
            refinement_check: extras.refinement_check,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CmdResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CmdResult<()> {
        self.solver.validate()?;
        check_eps(self.eps)?;
        if !(self.datum.amplitude > 0.0 && self.datum.amplitude.is_finite()) {
            return Err(Failure::usage(format!("amplitude must be positive, got {}", self.datum.amplitude)));
        }
        if self.datum.initial == InitialKind::Random && (self.datum.modes == 0 || self.datum.modes >= self.solver.n_points / 3) {
            return Err(Failure::usage(format!(
                "modes must lie in [1, n_points/3), got {}",
                self.datum.modes
            )));
        }
        Ok(())
    }

    pub fn initial_field(&self) -> CmdResult<GridFunction> {
        let (l, n) = (self.solver.domain_length, self.solver.n_points);
        let d = &self.datum;
        Ok(match d.initial {
            InitialKind::ScaledSine => datum_factory(DatumKind::ScaledSine, d.amplitude, d.width, l, n)?.grid,
            InitialKind::BumpDerivative => datum_factory(DatumKind::BumpDerivative, d.amplitude, d.width, l, n)?.grid,
            InitialKind::Random => {
                let mut rng = StdRng::seed_from_u64(d.seed);
                let coef: Vec<(f64, f64)> = (0..d.modes)
                    .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                GridFunction::from_fn(l, n, |x| {
                    coef.iter()
                        .enumerate()
                        .map(|(i, (a, b))| {
                            let k = (i + 1) as f64;
                            let th = 2.0 * PI * k * x / l;
                            d.amplitude * (a * th.cos() + b * th.sin()) / k
                        })
                        .sum()
                })?
            }
        })
    }
}
