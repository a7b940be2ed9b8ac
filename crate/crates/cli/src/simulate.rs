use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use whitham_core::characteristics::{
    breaking_detect, detect_with_refinement, slope_series_dense, BreakingOptions, BreakingReport,
};
use whitham_core::solver::{run_from, run_with_checkpoints, write_field_csv, Checkpoint, Trajectory};
use whitham_core::spectral::GridFunction;

use crate::config::RunConfig;
use crate::{CmdResult, Failure, RunManifest};

#[derive(Clone, Debug)]
pub struct SimulateOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    /// Continue from a checkpoint written by an earlier run of the same config.
    pub resume: Option<PathBuf>,
    /// Overrides `refinement_check` from the config when set.
    pub refine: bool,
}

pub struct SimulateOutcome {
    pub report: BreakingReport,
    pub manifest: RunManifest,
}

fn write_field(dir: &Path, name: &str, u: &GridFunction, outputs: &mut Vec<String>) -> CmdResult<()> {
    write_field_csv(u, BufWriter::new(File::create(dir.join(name))?))?;
    outputs.push(name.into());
    Ok(())
}

/// Writes the per-run artifacts of a finished trajectory into `dir`.
pub fn write_run_outputs(dir: &Path, traj: &Trajectory, report: &BreakingReport, outputs: &mut Vec<String>) -> CmdResult<()> {
    traj.write_csv(BufWriter::new(File::create(dir.join("trajectory.csv"))?))?;
    outputs.push("trajectory.csv".into());
    slope_series_dense(traj).write_csv(BufWriter::new(File::create(dir.join("slope.csv"))?))?;
    outputs.push("slope.csv".into());
    write_field(dir, "field_initial.csv", &traj.first().state.u, outputs)?;
    write_field(dir, "field_final.csv", &traj.last().state.u, outputs)?;
    fs::write(dir.join("report.json"), serde_json::to_vec_pretty(report)?)?;
    outputs.push("report.json".into());
    Ok(())
}

pub fn simulate(opts: &SimulateOptions, command_line: Vec<String>) -> CmdResult<SimulateOutcome> {
    let started = Instant::now();
    let cfg = RunConfig::load(&opts.config)?;
    let refine = opts.refine || cfg.refinement_check;
    fs::create_dir_all(&opts.out)?;
    let mut manifest = RunManifest::new(command_line, serde_json::to_value(&cfg)?);

    let ck_dir = opts.out.join("checkpoints");
    if cfg.solver.checkpoint_every > 0 {
        fs::create_dir_all(&ck_dir)?;
    }
    let mut written = Vec::new();
    let mut save = |cp: &Checkpoint| -> whitham_core::Result<()> {
        let name = format!("checkpoints/step_{:010}.json", cp.step_count);
        cp.save(&opts.out.join(&name))?;
        written.push(name);
        Ok(())
    };

    let (traj, report) = match &opts.resume {
        Some(path) => {
            if refine {
                return Err(Failure::usage("a resumed run cannot repeat the refinement check"));
            }
            let cp = Checkpoint::load(path)
                .map_err(|e| Failure::usage(format!("cannot load checkpoint {}: {e}", path.display())))?;
            if cp.config != cfg.solver {
                return Err(Failure::usage("checkpoint was written under a different solver configuration"));
            }
            let traj = run_from(&cfg.solver, cp.state()?, &mut save)?;
            let report = breaking_detect(&traj, cfg.eps)?;
            (traj, report)
        }
        None if refine => {
            let u0 = cfg.initial_field()?;
            let r = detect_with_refinement(&cfg.solver, &u0, cfg.eps, BreakingOptions::default())?;
            (r.coarse, r.report)
        }
        None => {
            let traj = run_with_checkpoints(&cfg.solver, cfg.initial_field()?, &mut save)?;
            let report = breaking_detect(&traj, cfg.eps)?;
            (traj, report)
        }
    };
    manifest.outputs.extend(written);
    write_run_outputs(&opts.out, &traj, &report, &mut manifest.outputs)?;
    manifest.verdicts = json!({
        "verdict": report.verdict,
        "run_end": report.run_end,
        "t_est": report.t_est,
        "bracket_pass": report.bracket_pass,
        "resumed_from": opts.resume.as_ref().map(|p| p.display().to_string()),
    });
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(&opts.out)?;
    Ok(SimulateOutcome { report, manifest })
}

pub fn summary_line(r: &BreakingReport) -> String {
    let t = r.t_est.map_or("-".to_string(), |t| format!("{t:.6}"));
    let pass = match r.bracket_pass {
        Some(true) => "inside",
        Some(false) => "outside",
        None => "-",
    };
    format!(
        "verdict {:?}  run_end {:?}  T_est {t}  bracket [{:.6}, {:.6}] {pass}  m0 {:.4}  m_final {:.4}  points {}",
        r.verdict, r.run_end, r.t_lower, r.t_upper, r.m0, r.m_final, r.final_points
    )
}
