//! Trial execution, metrics and CSV output.
//!
//! A trial runs until the noiseless value of the mean reaches the target, the
//! evaluation budget would be exceeded by the next iteration, or the state
//! degenerates numerically. Evaluations are counted as λ per iteration; the
//! check on `f(m)` is free.

mod config;
pub mod metrics;
pub mod output;
mod sweep;

pub use config::{AlgorithmKind, RunConfig, CONFIG_KEYS};
pub use metrics::{ecdf_curve, ecdf_grid, ecdf_targets, sp1, success_rate};
pub use sweep::{sweep, SweepRow};

use std::fmt;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::cma::{default_params, SearchDistribution};
use crate::error::{Error, Result};
use crate::linalg::spd_roots;
use crate::lra::{lra_step, Evaluator, LearningRate, LraState, ETA_MIN};
use crate::objectives::{random_rotation, Objective};
use crate::rng::{stream_rng, trial_seed, StreamRng, StreamRole};

/// Step-size below which a trial is stopped as numerically degenerate.
pub const SIGMA_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericalCause {
    SigmaUnderflow,
    NonFinite,
    /// Every candidate had the same objective value for many consecutive
    /// iterations: the step-size is too small to distinguish candidates.
    FlatFitness,
    LinearAlgebra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Target,
    Budget,
    Numerical(NumericalCause),
}

impl Termination {
    pub fn kind(&self) -> &'static str {
        match self {
            Termination::Target => "target",
            Termination::Budget => "budget",
            Termination::Numerical(_) => "numerical",
        }
    }

    pub fn cause(&self) -> &'static str {
        match self {
            Termination::Numerical(NumericalCause::SigmaUnderflow) => "sigma_underflow",
            Termination::Numerical(NumericalCause::NonFinite) => "non_finite",
            Termination::Numerical(NumericalCause::FlatFitness) => "flat_fitness",
            Termination::Numerical(NumericalCause::LinearAlgebra) => "linear_algebra",
            _ => "",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind())
    }
}

/// One recorded iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub t: u64,
    pub evals: u64,
    pub f_m: f64,
    /// Best observed (possibly noisy) value so far.
    pub f_best: f64,
    pub eta_m: f64,
    pub eta_sigma: f64,
    pub snr_m: f64,
    pub snr_sigma: f64,
    pub sigma: f64,
    pub eig_min: f64,
    pub eig_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub success: bool,
    pub evaluations_to_target: Option<u64>,
    pub evaluations: u64,
    pub iterations: u64,
    pub termination: Termination,
    /// Noiseless `f(m)` at the end of the trial.
    pub final_f_m: f64,
    pub best_f: f64,
    pub final_sigma: f64,
    pub final_eta_m: f64,
    pub final_eta_sigma: f64,
    /// First evaluation count at which `f(m) ≤ target` for each ECDF target.
    pub target_hits: Vec<Option<u64>>,
    pub history: Vec<HistoryRow>,
    pub resamples: u64,
    pub clamped: u64,
    pub eta_floor_hits: u64,
    /// Largest `|Δ ln η| / min(γη, β)` seen; at most 1 for adaptive runs.
    pub max_eta_step_ratio: f64,
}

struct TrialEvaluator<'a> {
    objective: &'a Objective,
    noise: &'a mut StreamRng,
}

impl Evaluator for TrialEvaluator<'_> {
    fn evaluate(&mut self, x: &DVector<f64>) -> f64 {
        self.objective
            .evaluate(x, self.noise)
            .expect("dimension checked at construction")
    }

    fn mean_value(&mut self, m: &DVector<f64>) -> Option<f64> {
        self.objective.noiseless_value(m).ok()
    }
}

/// Builds the trial's objective; the rotation (if any) comes from the trial's
/// rotation stream.
pub fn trial_objective(cfg: &RunConfig, trial: u64) -> Result<Objective> {
    let obj = Objective::new(cfg.function()?, cfg.dim, cfg.noise_variance)?;
    if cfg.rotate {
        let mut rng = stream_rng(cfg.seed, trial, StreamRole::Rotation);
        obj.with_rotation(random_rotation(cfg.dim, &mut rng))
    } else {
        Ok(obj)
    }
}

fn flat_patience(d: usize, lambda: usize) -> usize {
    10 + (30 * d).div_ceil(lambda)
}

fn classify(err: &Error) -> NumericalCause {
    match err.root() {
        Error::NotPositiveDefinite { .. } | Error::InvalidMatrix(_) => NumericalCause::LinearAlgebra,
        _ => NumericalCause::NonFinite,
    }
}

pub fn run_trial(cfg: &RunConfig, trial: u64) -> Result<TrialRecord> {
    cfg.validate()?;
    let objective = trial_objective(cfg, trial)?;
    let params = default_params(cfg.dim, cfg.lambda)?;
    let mode = cfg.learning_rate();
    let hp = cfg.hyper_params();
    let budget = cfg.budget();
    let targets = ecdf_targets(cfg.n_targets);

    let spec = objective.function.init_spec(cfg.dim);
    let mut dist = SearchDistribution::new(objective.initial_mean(), spec.sigma0)?;
    let mut cma_state = crate::cma::CmaState::new(cfg.dim);
    let mut lra_state = LraState::for_mode(cfg.dim, &mode);
    let mut roots = spd_roots(&dist.cov)?;

    let mut sampling = stream_rng(cfg.seed, trial, StreamRole::Sampling);
    let mut noise = stream_rng(cfg.seed, trial, StreamRole::Noise);
    let bounds = objective.bounds.clone();

    let mut rec = TrialRecord {
        trial,
        seed: trial_seed(cfg.seed, trial),
        success: false,
        evaluations_to_target: None,
        evaluations: 0,
        iterations: 0,
        termination: Termination::Budget,
        final_f_m: f64::NAN,
        best_f: f64::INFINITY,
        final_sigma: dist.sigma,
        final_eta_m: lra_state.eta_m,
        final_eta_sigma: lra_state.eta_sigma,
        target_hits: vec![None; targets.len()],
        history: Vec::new(),
        resamples: 0,
        clamped: 0,
        eta_floor_hits: 0,
        max_eta_step_ratio: 0.0,
    };

    let mut f_m = objective.noiseless_value(&dist.mean)?;
    record_hits(&mut rec.target_hits, &targets, f_m, 0);
    let mut flat_run = 0usize;
    let patience = flat_patience(cfg.dim, params.lambda);
    let lambda = params.lambda as u64;

    let termination = loop {
        if f_m <= cfg.target {
            rec.success = true;
            rec.evaluations_to_target = Some(rec.evaluations);
            break Termination::Target;
        }
        if rec.evaluations + lambda > budget {
            break Termination::Budget;
        }

        let mut eval = TrialEvaluator {
            objective: &objective,
            noise: &mut noise,
        };
        let step = lra_step(
            &dist,
            &params,
            &cma_state,
            &mode,
            &lra_state,
            &roots,
            bounds.as_ref(),
            &mut sampling,
            &mut eval,
        );
        let it = match step {
            Ok(it) => it,
            Err(e) => {
                log::debug!("trial {trial}: {e}");
                break Termination::Numerical(classify(&e));
            }
        };
        rec.evaluations += lambda;
        rec.iterations += 1;
        let report = it.report;
        dist = it.dist;
        cma_state = it.cma_state;
        lra_state = it.lra_state;
        roots = it.roots;

        f_m = report.f_mean.unwrap_or(f64::NAN);
        rec.best_f = rec.best_f.min(report.f_best);
        rec.resamples += report.resamples as u64;
        rec.clamped += report.clamped as u64;
        if matches!(mode, LearningRate::Adaptive(_)) {
            rec.max_eta_step_ratio = rec.max_eta_step_ratio.max(report.eta_step_ratio(&hp));
            if report.eta_m == ETA_MIN || report.eta_sigma == ETA_MIN {
                rec.eta_floor_hits += 1;
            }
        }
        record_hits(&mut rec.target_hits, &targets, f_m, rec.evaluations);

        if cfg.history_stride > 0 && report.t % cfg.history_stride == 0 {
            rec.history.push(HistoryRow {
                t: report.t,
                evals: rec.evaluations,
                f_m,
                f_best: rec.best_f,
                eta_m: report.eta_m,
                eta_sigma: report.eta_sigma,
                snr_m: report.snr_m,
                snr_sigma: report.snr_sigma,
                sigma: report.sigma,
                eig_min: report.eig_min,
                eig_max: report.eig_max,
            });
        }

        if !f_m.is_finite() {
            break Termination::Numerical(NumericalCause::NonFinite);
        }
        if dist.sigma < SIGMA_FLOOR {
            break Termination::Numerical(NumericalCause::SigmaUnderflow);
        }
        flat_run = if report.flat_fitness { flat_run + 1 } else { 0 };
        if flat_run >= patience && f_m > cfg.target {
            break Termination::Numerical(NumericalCause::FlatFitness);
        }
    };

    if rec.eta_floor_hits > 0 {
        log::info!(
            "trial {trial}: learning-rate floor active in {} iterations",
            rec.eta_floor_hits
        );
    }
    if rec.resamples > 0 || rec.clamped > 0 {
        log::info!(
            "trial {trial}: {} bound resamples, {} clamped candidates",
            rec.resamples,
            rec.clamped
        );
    }
    rec.termination = termination;
    rec.final_f_m = f_m;
    rec.final_sigma = dist.sigma;
    rec.final_eta_m = lra_state.eta_m;
    rec.final_eta_sigma = lra_state.eta_sigma;
    Ok(rec)
}

fn record_hits(hits: &mut [Option<u64>], targets: &[f64], f_m: f64, evals: u64) {
    for (hit, target) in hits.iter_mut().zip(targets) {
        if hit.is_none() && f_m <= *target {
            *hit = Some(evals);
        }
    }
}

/// Runs all trials of `cfg` on up to `jobs` threads (0 = rayon default).
/// Results are ordered by trial index regardless of scheduling.
pub fn run_trials(cfg: &RunConfig, jobs: usize) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let n = cfg.trials() as u64;
    let work = || {
        (0..n)
            .into_par_iter()
            .map(|i| run_trial(cfg, i))
            .collect::<Result<Vec<_>>>()
    };
    if jobs == 1 {
        return (0..n).map(|i| run_trial(cfg, i)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(work)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub trials: usize,
    pub success_rate: f64,
    pub sp1: Option<f64>,
}

pub fn summarize(records: &[TrialRecord]) -> Summary {
    Summary {
        trials: records.len(),
        success_rate: success_rate(records),
        sp1: sp1(records),
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trials={} success_rate={:.3} sp1=", self.trials, self.success_rate)?;
        match self.sp1 {
            Some(v) => write!(f, "{v:.1}"),
            None => f.write_str("NA"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(objective: &str) -> RunConfig {
        RunConfig {
            objective: objective.into(),
            dim: 4,
            trials: Some(2),
            budget: Some(200_000),
            ..Default::default()
        }
    }

    #[test]
    fn sphere_default_rate_hits_target() {
        let cfg = RunConfig {
            algorithm: AlgorithmKind::Fixed,
            dim: 10,
            budget: Some(10_000_000),
            ..quick("sphere")
        };
        let r = run_trial(&cfg, 0).unwrap();
        assert!(r.success);
        assert_eq!(r.termination, Termination::Target);
        assert!(r.evaluations_to_target.unwrap() <= cfg.budget());
        assert!(r.target_hits.iter().all(|h| h.is_some()));
    }

    #[test]
    fn starved_run_hits_budget() {
        let cfg = RunConfig {
            budget: Some(10),
            ..quick("sphere")
        };
        let r = run_trial(&cfg, 0).unwrap();
        assert_eq!(r.termination, Termination::Budget);
        assert!(!r.success);
        assert!(r.evaluations <= 10);
    }

    #[test]
    fn trial_is_reproducible() {
        let cfg = RunConfig {
            noise_variance: 1.0,
            budget: Some(20_000),
            ..quick("rastrigin")
        };
        assert_eq!(run_trial(&cfg, 1).unwrap(), run_trial(&cfg, 1).unwrap());
        assert_ne!(
            run_trial(&cfg, 1).unwrap().final_f_m,
            run_trial(&cfg, 2).unwrap().final_f_m
        );
    }

    #[test]
    fn success_iff_evaluations_present() {
        for obj in ["sphere", "rastrigin", "ackley"] {
            for r in run_trials(&quick(obj), 1).unwrap() {
                assert_eq!(r.success, r.evaluations_to_target.is_some());
                if let Some(e) = r.evaluations_to_target {
                    assert!(e <= quick(obj).budget());
                }
            }
        }
    }

    #[test]
    fn ackley_candidates_respect_bounds() {
        let cfg = RunConfig {
            history_stride: 1,
            ..quick("ackley")
        };
        let r = run_trial(&cfg, 0).unwrap();
        assert!(r.resamples > 0);
    }

    #[test]
    fn fixed_default_rate_stops_on_flat_fitness() {
        let cfg = RunConfig {
            algorithm: AlgorithmKind::Fixed,
            dim: 10,
            budget: Some(10_000_000),
            ..quick("rastrigin")
        };
        let r = run_trial(&cfg, 0).unwrap();
        if !r.success {
            assert!(
                matches!(r.termination, Termination::Numerical(_)),
                "{:?}",
                r.termination
            );
            assert!(r.evaluations < 1_000_000);
        }
    }

    #[test]
    fn serial_and_parallel_agree() {
        let cfg = RunConfig {
            trials: Some(4),
            ..quick("rastrigin")
        };
        assert_eq!(run_trials(&cfg, 1).unwrap(), run_trials(&cfg, 3).unwrap());
    }

    #[test]
    fn adaptive_eta_step_bounded() {
        let r = run_trial(&quick("rastrigin"), 0).unwrap();
        assert!(r.max_eta_step_ratio <= 1.0 + 1e-6);
        assert!(r.max_eta_step_ratio > 0.0);
    }
}
