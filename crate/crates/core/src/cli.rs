//! Command-line front end for the `lracma` binary.
//!
//! Exit status: 0 on completion, 1 on invalid invocation or configuration,
//! 2 when a run fails after it started.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::output::{write_ecdf, write_file, write_history, write_ode, write_sweep, write_trials};
use crate::harness::{ecdf_curve, ecdf_grid, run_trials, summarize, sweep, RunConfig};
use crate::objectives::Function;
use crate::ode::{euler_integrate, ode_file_name, EulerOptions, OdeState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "lracma",
    version,
    about = "CMA-ES with SNR-based learning-rate adaptation: experiments and CSV output",
    after_help = "Outputs:\n  run    -> trials.csv, history.csv\n  ecdf   -> ecdf.csv\n  sweep  -> sweep.csv\n  ode    -> ode_eta<η>_m<m0>_v<v0>.csv per learning rate (plus ode.csv for a single rate)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a set of trials for one configuration; writes trials.csv and history.csv.
    Run(RunArgs),
    /// Run several algorithms on one problem; writes ecdf.csv (one column per algorithm).
    Ecdf(EcdfArgs),
    /// Run full trial sets for each value of one parameter; writes sweep.csv.
    Sweep(SweepArgs),
    /// Euler-integrate the 1-D Rastrigin mean/variance dynamics; writes one CSV per rate.
    Ode(OdeArgs),
    /// List the available objective functions.
    ListObjectives,
}

/// Configuration shared by the experiment subcommands. Flags override values
/// from `--config`; both are validated by the same rules.
#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// TOML file whose keys mirror the flag names (with underscores).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub dim: Option<String>,
    /// Population size; defaults to 4 + floor(3 ln d).
    #[arg(long)]
    pub lambda: Option<String>,
    /// `lra` (adaptive) or `fixed`.
    #[arg(long)]
    pub algorithm: Option<String>,
    #[arg(long)]
    pub eta_m: Option<String>,
    #[arg(long)]
    pub eta_sigma: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta_m: Option<String>,
    #[arg(long)]
    pub beta_sigma: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Variance of the additive Gaussian observation noise.
    #[arg(long)]
    pub noise_variance: Option<String>,
    /// Evaluate the objective under a random rotation drawn per trial.
    #[arg(long)]
    pub rotate: bool,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    /// Evaluation budget per trial (accepts `1e7`).
    #[arg(long)]
    pub budget: Option<String>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub history_stride: Option<String>,
    #[arg(long)]
    pub n_targets: Option<String>,
    /// Output directory for CSV files.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

impl ConfigArgs {
    pub fn to_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags: [(&str, &Option<String>); 17] = [
            ("objective", &self.objective),
            ("dim", &self.dim),
            ("lambda", &self.lambda),
            ("algorithm", &self.algorithm),
            ("eta_m", &self.eta_m),
            ("eta_sigma", &self.eta_sigma),
            ("alpha", &self.alpha),
            ("beta_m", &self.beta_m),
            ("beta_sigma", &self.beta_sigma),
            ("gamma", &self.gamma),
            ("noise_variance", &self.noise_variance),
            ("seed", &self.seed),
            ("trials", &self.trials),
            ("budget", &self.budget),
            ("target", &self.target),
            ("history_stride", &self.history_stride),
            ("n_targets", &self.n_targets),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.rotate {
            cfg.rotate = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct EcdfArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Algorithm to include: `lra`, `fixed` (η from the config) or
    /// `fixed:<eta_m>:<eta_sigma>`. Repeatable; defaults to `lra` and `fixed:1:1`.
    #[arg(long = "algo")]
    pub algos: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Config key to vary, e.g. `alpha`, `lambda`, `beta_sigma`, `dim`.
    #[arg(long)]
    pub param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
}

#[derive(Debug, Args)]
pub struct OdeArgs {
    /// Learning rate; repeatable.
    #[arg(long, default_values_t = [1e-5, 1e-4, 1e-3, 1e-2])]
    pub eta: Vec<f64>,
    #[arg(long, default_value_t = 3.0)]
    pub m0: f64,
    #[arg(long, default_value_t = 2.0)]
    pub v0: f64,
    /// Maximum Euler steps.
    #[arg(long, default_value_t = 10_000_000)]
    pub steps: u64,
    /// Keep every k-th state.
    #[arg(long, default_value_t = 1000)]
    pub stride: u64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

/// Parses an `--algo` value into a config derived from `base`.
pub fn algo_config(base: &RunConfig, spec: &str) -> Result<RunConfig> {
    let mut cfg = base.clone();
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [name] => cfg.set("algorithm", name)?,
        ["fixed", m, s] => {
            cfg.set("algorithm", "fixed")?;
            cfg.set("eta_m", m)?;
            cfg.set("eta_sigma", s)?;
        }
        _ => {
            return Err(Error::InvalidConfig(format!(
                "algo: cannot parse '{spec}' (expected lra, fixed or fixed:<eta_m>:<eta_sigma>)"
            )))
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

fn config<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Config)
}

fn runtime<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Runtime)
}

fn announce(path: &Path) {
    log::info!("wrote {}", path.display());
}

fn cmd_run(args: &RunArgs) -> std::result::Result<(), Failure> {
    let cfg = config(args.cfg.to_config())?;
    let records = runtime(run_trials(&cfg, args.cfg.jobs))?;
    let dir = &args.cfg.out_dir;
    announce(&runtime(write_file(dir, "trials.csv", |w| write_trials(w, &records)))?);
    announce(&runtime(write_file(dir, "history.csv", |w| {
        write_history(w, &records)
    }))?);
    println!(
        "{} d={} {}: {}",
        cfg.objective,
        cfg.dim,
        cfg.algorithm_label(),
        summarize(&records)
    );
    Ok(())
}

fn cmd_ecdf(args: &EcdfArgs) -> std::result::Result<(), Failure> {
    let base = config(args.cfg.to_config())?;
    let specs: Vec<String> = if args.algos.is_empty() {
        vec!["lra".into(), "fixed:1:1".into()]
    } else {
        args.algos.clone()
    };
    let cfgs = config(specs.iter().map(|s| algo_config(&base, s)).collect::<Result<Vec<_>>>())?;
    let grid = ecdf_grid(base.budget());
    let mut curves = Vec::new();
    for cfg in &cfgs {
        let records = runtime(run_trials(cfg, args.cfg.jobs))?;
        println!(
            "{} d={} {}: {}",
            cfg.objective,
            cfg.dim,
            cfg.algorithm_label(),
            summarize(&records)
        );
        curves.push((cfg.algorithm_label(), ecdf_curve(&records, cfg.n_targets, &grid)));
    }
    announce(&runtime(write_file(&args.cfg.out_dir, "ecdf.csv", |w| {
        write_ecdf(w, &grid, &curves)
    }))?);
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> std::result::Result<(), Failure> {
    let base = config(args.cfg.to_config())?;
    // validates every value up front, so errors here are configuration errors
    for v in &args.values {
        let mut c = base.clone();
        config(c.set(&args.param, v).and_then(|_| c.validate()))?;
    }
    let rows = runtime(sweep(&base, &args.param, &args.values, args.cfg.jobs))?;
    for r in &rows {
        let sp1 = r.sp1.map(|v| format!("{v:.1}")).unwrap_or_else(|| "NA".into());
        println!(
            "{}={}: success_rate={:.3} sp1={}",
            args.param, r.value, r.success_rate, sp1
        );
    }
    announce(&runtime(write_file(&args.cfg.out_dir, "sweep.csv", |w| {
        write_sweep(w, &rows)
    }))?);
    Ok(())
}

fn cmd_ode(args: &OdeArgs) -> std::result::Result<(), Failure> {
    if args.eta.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Failure::Config(Error::InvalidConfig("eta: must be positive".into())));
    }
    if !(args.v0.is_finite() && args.v0 > 0.0 && args.m0.is_finite()) {
        return Err(Failure::Config(Error::InvalidConfig(
            "v0: must be positive and finite".into(),
        )));
    }
    for &eta in &args.eta {
        let opts = EulerOptions {
            stride: args.stride,
            ..EulerOptions::new(eta, args.steps)
        };
        let tr = euler_integrate(OdeState::new(args.m0, args.v0), &opts);
        if let Some(e) = &tr.degenerate {
            log::warn!("eta={eta:e}: {e}");
        }
        let name = ode_file_name(eta, args.m0, args.v0);
        announce(&runtime(write_file(&args.out_dir, &name, |w| {
            write_ode(w, &tr.states)
        }))?);
        if args.eta.len() == 1 {
            announce(&runtime(write_file(&args.out_dir, "ode.csv", |w| {
                write_ode(w, &tr.states)
            }))?);
        }
        println!(
            "eta={eta:e}: steps={} m={} v={}{}",
            tr.last.step,
            tr.last.m,
            tr.last.v,
            if tr.degenerate.is_some() {
                " (degenerate variance)"
            } else {
                ""
            }
        );
    }
    Ok(())
}

fn cmd_list() {
    println!("{:<12} {:>7} {:>10}  bounds", "name", "min_dim", "multimodal");
    for f in Function::ALL {
        let bounds = f
            .bounds()
            .map(|b| format!("[{}, {}]", b.lower, b.upper))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<12} {:>7} {:>10}  {}",
            f.name(),
            f.min_dim(),
            f.is_multimodal(),
            bounds
        );
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Ecdf(a) => cmd_ecdf(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Ode(a) => cmd_ode(a),
        Command::ListObjectives => {
            cmd_list();
            Ok(())
        }
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
