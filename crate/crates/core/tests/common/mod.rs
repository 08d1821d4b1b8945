//! Helpers shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use nalgebra::DVector;

use lra_cmaes::cma::{default_params, draw_z, population_from_z, CmaState, RankedPopulation, SearchDistribution};
use lra_cmaes::linalg::{spd_roots, sym_eig};
use lra_cmaes::lra::{lra_update, IterationReport, LearningRate, LraState};
use lra_cmaes::objectives::Objective;
use lra_cmaes::rng::{stream_rng, StreamRole};
use lra_cmaes::Result;

/// Per-iteration trace of a directly driven run.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// Noiseless `f(m)` after each iteration.
    pub f_mean: Vec<f64>,
    pub reports: Vec<IterationReport>,
    /// Smallest eigenvalue of `C` after each iteration.
    pub c_eig_min: Vec<f64>,
}

/// Runs `iters` iterations of the optimizer on `obj` from its table
/// initialization, drawing normal vectors from the sampling stream of
/// `(seed, 0)`. When `obj` carries a rotation `R`, each drawn vector `z` is
/// replaced by `Rᵀz`; together with the initial mean `Rᵀm₀` this makes the
/// rotated run the exact image of the unrotated one.
pub fn drive(obj: &Objective, mode: &LearningRate, seed: u64, iters: usize) -> Result<Trace> {
    let d = obj.dim;
    let params = default_params(d, None)?;
    let spec = obj.function.init_spec(d);
    let mut dist = SearchDistribution::new(obj.initial_mean(), spec.sigma0)?;
    let mut cma = CmaState::new(d);
    let mut lra = LraState::for_mode(d, mode);
    let mut roots = spd_roots(&dist.cov)?;
    let mut rng = stream_rng(seed, 0, StreamRole::Sampling);
    let mut noise = stream_rng(seed, 0, StreamRole::Noise);
    let mut trace = Trace::default();
    for _ in 0..iters {
        let z: Vec<DVector<f64>> = (0..params.lambda)
            .map(|_| {
                let z = draw_z(d, &mut rng);
                match &obj.rotation {
                    Some(r) => r.transpose() * z,
                    None => z,
                }
            })
            .collect();
        let pop = population_from_z(&dist, &roots.sqrt, z);
        let f = pop
            .x
            .iter()
            .map(|x| obj.evaluate(x, &mut noise))
            .collect::<Result<Vec<_>>>()?;
        let ranked = RankedPopulation::new(pop, f)?;
        let it = lra_update(&dist, &params, &cma, mode, &lra, &roots, &ranked)?;
        dist = it.dist;
        cma = it.cma_state;
        lra = it.lra_state;
        roots = it.roots;
        trace.f_mean.push(obj.noiseless_value(&dist.mean)?);
        trace.c_eig_min.push(sym_eig(&dist.cov)?.min());
        trace.reports.push(it.report);
    }
    Ok(trace)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Time-averaged SNR estimate on an i.i.d. Gaussian stream with mean
/// `mu` (per coordinate) and isotropic variance `s2`, in dimension `d`.
pub fn synthetic_snr(d: usize, mu: f64, s2: f64, beta: f64, seed: u64, samples: usize) -> f64 {
    use lra_cmaes::lra::{estimate_snr, update_averages};
    use rand_distr::{Distribution, Normal};
    let mut rng = stream_rng(seed, 0, StreamRole::Noise);
    let normal = Normal::new(mu, s2.sqrt()).unwrap();
    let mut e = DVector::zeros(d);
    let mut v = 0.0;
    let warmup = (10.0 / beta).ceil() as usize;
    let mut acc = 0.0;
    for k in 0..warmup + samples {
        let delta = DVector::from_fn(d, |_, _| normal.sample(&mut rng));
        let (e2, v2) = update_averages(&e, v, &delta, beta);
        e = e2;
        v = v2;
        if k >= warmup {
            acc += estimate_snr(&e, v, beta);
        }
    }
    acc / samples as f64
}
