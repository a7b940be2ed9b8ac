use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use whitham_cli::check::{check, CheckOptions};
use whitham_cli::simulate::{simulate, summary_line, SimulateOptions};
use whitham_cli::sweep::{sweep, SweepOptions};
use whitham_cli::verify::{verify, Suite};
use whitham_cli::CmdResult;
use whitham_core::hypothesis::{DatumKind, Theorem};

#[derive(Parser)]
#[command(name = "whitham", version, about = "Wave-breaking experiments for the fractional Whitham equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and classify the outcome.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Checkpoint file to continue from.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Repeat on a twice-finer grid and require agreement.
        #[arg(long)]
        refine: bool,
    },
    /// Run a base configuration over lists of alpha and/or eps.
    Sweep {
        base: PathBuf,
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long, default_value = "sweep_out")]
        out: PathBuf,
        /// Skip the refinement twin of each run.
        #[arg(long)]
        no_refine: bool,
    },
    /// Evaluate the hypotheses of a breaking statement on a datum.
    Check {
        #[arg(long, default_value = "scaled-sine")]
        datum: DatumKind,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 1.0)]
        width: f64,
        #[arg(long, default_value_t = 2.0 * std::f64::consts::PI)]
        domain_length: f64,
        #[arg(long, default_value_t = 256)]
        n_points: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// gevrey (Gevrey-class data) or sobolev (H^2 data).
        #[arg(long, default_value = "gevrey")]
        theorem: Theorem,
        #[arg(long)]
        c0: Option<f64>,
        #[arg(long)]
        c1: Option<f64>,
        #[arg(long)]
        c2: Option<f64>,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        /// Search for the smallest amplitude meeting the steepness conditions.
        #[arg(long)]
        bisect: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a self-check suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
}

fn dispatch(cli: Cli, argv: Vec<String>) -> CmdResult<bool> {
    match cli.command {
        Command::Simulate { config, out, resume, refine } => {
            let o = simulate(&SimulateOptions { config, out: out.clone(), resume, refine }, argv)?;
            println!("{}", summary_line(&o.report));
            println!("outputs in {}", out.display());
            Ok(true)
        }
        Command::Sweep { base, alpha, eps, out, no_refine } => {
            let rows = sweep(
                &SweepOptions {
                    base,
                    alphas: alpha,
                    eps,
                    out: out.clone(),
                    refine: !no_refine,
                },
                argv,
            )?;
            println!("{:>8} {:>6} {:>22} {:>12}  error", "alpha", "eps", "verdict", "T_est");
            for r in &rows {
                println!(
                    "{:>8} {:>6} {:>22} {:>12}  {}",
                    r.alpha,
                    r.eps,
                    r.verdict.map_or("-".into(), |v| format!("{v:?}")),
                    r.t_est.map_or("-".into(), |t| format!("{t:.6}")),
                    r.error.as_deref().unwrap_or("")
                );
            }
            println!("summary in {}", out.join("summary.csv").display());
            Ok(true)
        }
        Command::Check {
            datum,
            amplitude,
            width,
            domain_length,
            n_points,
            alpha,
            eps,
            theorem,
            c0,
            c1,
            c2,
            n_max,
            bisect,
            json,
        } => {
            let o = check(&CheckOptions {
                datum,
                amplitude,
                width,
                domain_length,
                n_points,
                alpha,
                eps,
                theorem,
                c0,
                c1,
                c2,
                n_max,
                bisect,
                json,
            })?;
            println!("{}", o.report);
            if bisect {
                match o.threshold {
                    Some(t) => println!("threshold amplitude A* = {:.10e} (factor {:.10e})", t.amplitude, t.factor),
                    None => println!("threshold amplitude A*: not found below 2^200 times the given amplitude"),
                }
            }
            Ok(true)
        }
        Command::Verify { suite } => {
            let rows = verify(suite)?;
            println!("{:<44} {:>12} {:>12}  status", "check", "measured", "tolerance");
            for r in &rows {
                println!("{r}");
            }
            Ok(rows.iter().all(|r| r.pass))
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    match dispatch(cli, argv) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

