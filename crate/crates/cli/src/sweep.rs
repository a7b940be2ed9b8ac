use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use whitham_core::characteristics::{breaking_detect, detect_with_refinement, BreakingOptions, BreakingReport, Verdict};
use whitham_core::solver::run;
use whitham_core::spectral::Alpha;

use crate::config::RunConfig;
use crate::{CmdResult, Failure, RunManifest};

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub base: PathBuf,
    pub alphas: Vec<f64>,
    pub eps: Vec<f64>,
    pub out: PathBuf,
    pub refine: bool,
}

/// One line of `summary.csv`; failed runs keep their parameters and an error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub eps: f64,
    pub verdict: Option<Verdict>,
    pub t_est: Option<f64>,
    pub bracket_pass: Option<bool>,
    pub crossing_time: Option<f64>,
    pub m0: Option<f64>,
    pub final_points: Option<usize>,
    pub refinement_stable: Option<bool>,
    pub error: Option<String>,
}

fn run_point(base: &RunConfig, alpha: f64, eps: f64, refine: bool) -> CmdResult<BreakingReport> {
    let mut cfg = base.clone();
    cfg.solver.alpha = Alpha::new(alpha)?;
    cfg.eps = eps;
    cfg.validate()?;
    let u0 = cfg.initial_field()?;
    if refine {
        Ok(detect_with_refinement(&cfg.solver, &u0, eps, BreakingOptions::default())?.report)
    } else {
        Ok(breaking_detect(&run(&cfg.solver, u0)?, eps)?)
    }
}

/// Runs every `(alpha, eps)` pair concurrently; rows keep the input order.
pub fn sweep(opts: &SweepOptions, command_line: Vec<String>) -> CmdResult<Vec<SweepRow>> {
    let started = Instant::now();
    if opts.alphas.is_empty() && opts.eps.is_empty() {
        return Err(Failure::usage("sweep needs a non-empty alpha or eps list"));
    }
    let base = RunConfig::load(&opts.base)?;
    let alphas = if opts.alphas.is_empty() { vec![base.solver.alpha.value()] } else { opts.alphas.clone() };
    let epss = if opts.eps.is_empty() { vec![base.eps] } else { opts.eps.clone() };
    let points: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| epss.iter().map(move |&e| (a, e))).collect();

    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(alpha, eps)| {
            let mut row = SweepRow {
                alpha,
                eps,
                verdict: None,
                t_est: None,
                bracket_pass: None,
                crossing_time: None,
                m0: None,
                final_points: None,
                refinement_stable: None,
                error: None,
            };
            match run_point(&base, alpha, eps, opts.refine) {
                Ok(r) => {
                    row.verdict = Some(r.verdict);
                    row.t_est = r.t_est;
                    row.bracket_pass = r.bracket_pass;
                    row.crossing_time = r.crossing_time;
                    row.m0 = Some(r.m0);
                    row.final_points = Some(r.final_points);
                    row.refinement_stable = r.refinement.map(|x| x.stable);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();

    fs::create_dir_all(&opts.out)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(opts.out.join("summary.csv"))?));
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut manifest = RunManifest::new(command_line, serde_json::to_value(&base)?);
    manifest.outputs.push("summary.csv".into());
    manifest.verdicts = json!(rows
        .iter()
        .map(|r| json!({"alpha": r.alpha, "eps": r.eps, "verdict": r.verdict, "error": r.error}))
        .collect::<Vec<_>>());
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(&opts.out)?;
    Ok(rows)
}
