//! Learning rate adaptation around the CMA-ES proposal.
//!
//! Each iteration the raw CMA-ES deltas of `m` and `Σ = σ²C` are mapped to
//! local coordinates where the Fisher metric is the identity, accumulated in
//! exponential moving averages, and turned into a signal-to-noise estimate.
//! The factors `η_m`, `η_Σ` are nudged so the estimate tracks `α·η`, the
//! scaled deltas are applied, `Σ` is split back into `σ` and `C`, and `σ` is
//! rescaled by the change of `η_m`.

use nalgebra::DVector;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cma::{
    default_params, propose_update, sample_population, BoxBounds, CmaParams, CmaState, Population, RankedPopulation,
    SearchDistribution,
};
use crate::error::{Error, Result};
use crate::linalg::{spd_clamp, spd_roots, EigenDecomposition, SpdRoots, SymMatrix};

/// Returned by [`estimate_snr`] when the variance estimate vanishes.
pub const SNR_MAX: f64 = 1e6;
/// Absolute guard on the denominator `V − ‖E‖²`.
pub const SNR_DENOM_EPS: f64 = 1e-300;
/// Lower bound on both learning-rate factors.
pub const ETA_MIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LraHyperParams {
    pub alpha: f64,
    pub beta_m: f64,
    pub beta_sigma: f64,
    pub gamma: f64,
}

impl Default for LraHyperParams {
    fn default() -> Self {
        LraHyperParams {
            alpha: 1.4,
            beta_m: 0.1,
            beta_sigma: 0.03,
            gamma: 0.1,
        }
    }
}

impl LraHyperParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.alpha) || !ok(self.gamma) {
            return Err(Error::InvalidConfig("alpha and gamma must be positive".into()));
        }
        for (name, b) in [("beta_m", self.beta_m), ("beta_sigma", self.beta_sigma)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        Ok(())
    }
}

/// How the learning-rate factors evolve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Adaptive(LraHyperParams),
    /// Constant factors. With `eta_sigma == 1` the CMA-ES proposal for `σ` and
    /// `C` is kept verbatim, so `Fixed { 1, 1 }` is plain CMA-ES bit for bit.
    Fixed {
        eta_m: f64,
        eta_sigma: f64,
    },
}

impl LearningRate {
    /// Moving-average factors; fixed mode still tracks SNR for reporting.
    fn betas(&self) -> (f64, f64) {
        match self {
            LearningRate::Adaptive(hp) => (hp.beta_m, hp.beta_sigma),
            LearningRate::Fixed { .. } => {
                let hp = LraHyperParams::default();
                (hp.beta_m, hp.beta_sigma)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearningRate::Adaptive(hp) => hp.validate(),
            LearningRate::Fixed { eta_m, eta_sigma } => {
                for (name, v) in [("eta_m", eta_m), ("eta_sigma", eta_sigma)] {
                    if !(*v > 0.0 && *v <= 1.0) {
                        return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1], got {v}")));
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LraState {
    pub eta_m: f64,
    pub eta_sigma: f64,
    pub e_m: DVector<f64>,
    pub v_m: f64,
    /// Row-major `d²` vector.
    pub e_sigma: DVector<f64>,
    pub v_sigma: f64,
}

impl LraState {
    pub fn new(d: usize) -> Self {
        LraState {
            eta_m: 1.0,
            eta_sigma: 1.0,
            e_m: DVector::zeros(d),
            v_m: 0.0,
            e_sigma: DVector::zeros(d * d),
            v_sigma: 0.0,
        }
    }

    pub fn for_mode(d: usize, mode: &LearningRate) -> Self {
        let mut s = Self::new(d);
        if let LearningRate::Fixed { eta_m, eta_sigma } = *mode {
            s.eta_m = eta_m;
            s.eta_sigma = eta_sigma;
        }
        s
    }
}

/// Deltas in local coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDelta {
    pub m: DVector<f64>,
    /// Row-major `d²` vectorization of a symmetric matrix.
    pub sigma: DVector<f64>,
}

/// `Δ_m = m' − m`, `Δ_Σ = vec(σ'²C' − σ²C)`.
pub fn compute_deltas(old: &SearchDistribution, proposed: &SearchDistribution) -> (DVector<f64>, DVector<f64>) {
    let dm = &proposed.mean - &old.mean;
    let ds = proposed.sigma_matrix().as_matrix() - old.sigma_matrix().as_matrix();
    (dm, row_major(&ds))
}

fn row_major(m: &nalgebra::DMatrix<f64>) -> DVector<f64> {
    // nalgebra storage is column-major; transpose to read rows in order
    DVector::from_column_slice(m.transpose().as_slice())
}

fn unvec(v: &DVector<f64>, d: usize) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(d, d, v.as_slice())
}

/// Local coordinates given `√Σ⁻¹` of the pre-update distribution.
pub fn to_local_with(inv_sqrt_sigma: &SymMatrix, delta_m: &DVector<f64>, delta_sigma: &DVector<f64>) -> LocalDelta {
    let a = inv_sqrt_sigma.as_matrix();
    let d = a.nrows();
    let m = a * delta_m;
    let inner = a * unvec(delta_sigma, d) * a;
    let sigma = row_major(&SymMatrix::symmetrize(&inner).as_matrix().clone()) * std::f64::consts::FRAC_1_SQRT_2;
    LocalDelta { m, sigma }
}

pub fn to_local(old: &SearchDistribution, delta_m: &DVector<f64>, delta_sigma: &DVector<f64>) -> Result<LocalDelta> {
    let roots = spd_roots(&old.cov)?;
    Ok(to_local_with(
        &roots.inv_sqrt.scale(1.0 / old.sigma),
        delta_m,
        delta_sigma,
    ))
}

/// Exponential moving averages of the local delta and its squared norm.
pub fn update_averages(e: &DVector<f64>, v: f64, delta: &DVector<f64>, beta: f64) -> (DVector<f64>, f64) {
    let e_next = e * (1.0 - beta) + delta * beta;
    let v_next = (1.0 - beta) * v + beta * delta.norm_squared();
    (e_next, v_next)
}

/// `(‖E‖² − β/(2−β)·V) / (V − ‖E‖²)`, capped at [`SNR_MAX`] when the
/// denominator is not positive.
pub fn estimate_snr(e: &DVector<f64>, v: f64, beta: f64) -> f64 {
    let e_sq = e.norm_squared();
    let denom = v - e_sq;
    if denom <= SNR_DENOM_EPS {
        return SNR_MAX;
    }
    (e_sq - beta / (2.0 - beta) * v) / denom
}

/// Multiplicative learning-rate update, capped at 1 and floored at [`ETA_MIN`].
pub fn update_eta(eta: f64, snr_hat: f64, hp: &LraHyperParams, beta: f64) -> f64 {
    let relative = (snr_hat / (hp.alpha * eta) - 1.0).clamp(-1.0, 1.0);
    let next = (eta * ((hp.gamma * eta).min(beta) * relative).exp()).min(1.0);
    if next < ETA_MIN {
        log::debug!("learning rate floor active ({next:e} -> {ETA_MIN:e})");
        ETA_MIN
    } else {
        next
    }
}

/// `m + η_m Δ_m` and `Σ + η_Σ vec⁻¹(Δ_Σ)`, symmetrized and eigenvalue-clamped.
/// The returned decomposition belongs to the returned `Σ`.
pub fn apply_updates(
    old: &SearchDistribution,
    delta_m: &DVector<f64>,
    delta_sigma: &DVector<f64>,
    eta_m: f64,
    eta_sigma: f64,
) -> Result<(DVector<f64>, SymMatrix, EigenDecomposition)> {
    let d = old.dim();
    let mean = &old.mean + delta_m * eta_m;
    let sigma_old = old.sigma_matrix();
    let updated = sigma_old.as_matrix() + unvec(delta_sigma, d) * eta_sigma;
    let (sigma_matrix, eig) = spd_clamp(&SymMatrix::symmetrize(&updated))?;
    Ok((mean, sigma_matrix, eig))
}

/// Splits `Σ` into `σ = det(Σ)^{1/(2d)}` and `C = Σ/σ²` (so `det C = 1`).
/// The determinant is taken in log space so that large dimensions with a
/// small `σ` do not underflow.
pub fn decompose(sigma_matrix: &SymMatrix) -> Result<(f64, SymMatrix)> {
    let (clamped, eig) = spd_clamp(sigma_matrix)?;
    decompose_with(&clamped, &eig)
}

fn decompose_with(sigma_matrix: &SymMatrix, eig: &EigenDecomposition) -> Result<(f64, SymMatrix)> {
    let d = sigma_matrix.dim() as f64;
    let log_det: f64 = eig.clamped_eigenvalues()?.iter().map(|v| v.ln()).sum();
    let sigma = (log_det / (2.0 * d)).exp();
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::NumericalRange(format!("log det(Σ) = {log_det:e}")));
    }
    Ok((sigma, sigma_matrix.scale(1.0 / (sigma * sigma))))
}

/// `σ · η_m_old / η_m_new`.
pub fn correct_stepsize(sigma: f64, eta_m_old: f64, eta_m_new: f64) -> f64 {
    sigma * (eta_m_old / eta_m_new)
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    /// Iteration count after this step.
    pub t: u64,
    pub evaluations: usize,
    /// Best objective value observed in this population.
    pub f_best: f64,
    /// Objective at the new mean, when the caller supplies one.
    pub f_mean: Option<f64>,
    pub eta_m: f64,
    pub eta_sigma: f64,
    pub eta_m_prev: f64,
    pub eta_sigma_prev: f64,
    pub snr_m: f64,
    pub snr_sigma: f64,
    pub sigma: f64,
    /// Eigenvalue range of `σ²C` after the step.
    pub eig_min: f64,
    pub eig_max: f64,
    /// All observed values in the population were identical.
    pub flat_fitness: bool,
    pub resamples: usize,
    pub clamped: usize,
}

impl IterationReport {
    /// `|ln η' − ln η| / min(γ η, β)` for both factors; at most 1 under the update rule.
    pub fn eta_step_ratio(&self, hp: &LraHyperParams) -> f64 {
        let r = |prev: f64, next: f64, beta: f64| (next / prev).ln().abs() / (hp.gamma * prev).min(beta);
        r(self.eta_m_prev, self.eta_m, hp.beta_m).max(r(self.eta_sigma_prev, self.eta_sigma, hp.beta_sigma))
    }
}

/// Everything that changes from one iteration to the next.
#[derive(Debug, Clone)]
pub struct LraIteration {
    pub dist: SearchDistribution,
    pub cma_state: CmaState,
    pub lra_state: LraState,
    /// Square roots of the new `C`, ready for the next sampling step.
    pub roots: SpdRoots,
    pub report: IterationReport,
}

/// Applies one learning-rate-adapted update given an evaluated population.
/// `roots` must be the decomposition of `dist.cov` used to sample `ranked`.
pub fn lra_update(
    dist: &SearchDistribution,
    params: &CmaParams,
    cma_state: &CmaState,
    mode: &LearningRate,
    lra_state: &LraState,
    roots: &SpdRoots,
    ranked: &RankedPopulation,
) -> Result<LraIteration> {
    let t = cma_state.t;
    let annotate = |e: Error| e.at_iteration(t);
    let (proposed, mut next_cma) = propose_update(dist, params, cma_state, ranked)?;

    let (delta_m, delta_sigma) = compute_deltas(dist, &proposed);
    let local = to_local_with(&roots.inv_sqrt.scale(1.0 / dist.sigma), &delta_m, &delta_sigma);

    let (beta_m, beta_sigma) = mode.betas();
    let (e_m, v_m) = update_averages(&lra_state.e_m, lra_state.v_m, &local.m, beta_m);
    let (e_sigma, v_sigma) = update_averages(&lra_state.e_sigma, lra_state.v_sigma, &local.sigma, beta_sigma);
    let snr_m = estimate_snr(&e_m, v_m, beta_m);
    let snr_sigma = estimate_snr(&e_sigma, v_sigma, beta_sigma);

    let (eta_m, eta_sigma) = match mode {
        LearningRate::Adaptive(hp) => (
            update_eta(lra_state.eta_m, snr_m, hp, beta_m),
            update_eta(lra_state.eta_sigma, snr_sigma, hp, beta_sigma),
        ),
        LearningRate::Fixed { eta_m, eta_sigma } => (*eta_m, *eta_sigma),
    };

    let fixed_full_sigma = matches!(mode, LearningRate::Fixed { eta_sigma, .. } if *eta_sigma == 1.0);
    let (mean, sigma, cov, next_roots) = if fixed_full_sigma {
        let mean = if eta_m == 1.0 {
            proposed.mean.clone()
        } else {
            &dist.mean + &delta_m * eta_m
        };
        let next_roots = spd_roots(&proposed.cov).map_err(annotate)?;
        (mean, proposed.sigma, proposed.cov, next_roots)
    } else {
        let (mean, sigma_matrix, eig) =
            apply_updates(dist, &delta_m, &delta_sigma, eta_m, eta_sigma).map_err(annotate)?;
        let (sigma, cov) = decompose_with(&sigma_matrix, &eig).map_err(annotate)?;
        // eigenpairs of C are those of Σ scaled by σ⁻²
        let lam = eig
            .clamped_eigenvalues()
            .map_err(annotate)?
            .map(|v| v / (sigma * sigma));
        let next_roots = SpdRoots {
            sqrt: eig.rebuild_with(&lam.map(f64::sqrt)),
            inv_sqrt: eig.rebuild_with(&lam.map(|v| 1.0 / v.sqrt())),
            eig_min: lam[0],
            eig_max: lam[lam.len() - 1],
        };
        let sigma = correct_stepsize(sigma, lra_state.eta_m, eta_m);
        (mean, sigma, cov, next_roots)
    };

    let next = SearchDistribution { mean, sigma, cov };
    next.validate().map_err(annotate)?;
    next_cma.t += 1;

    let flat = ranked.f_values.iter().all(|f| *f == ranked.f_values[0]);
    let report = IterationReport {
        t: next_cma.t,
        evaluations: ranked.population.len(),
        f_best: ranked.best_f(),
        f_mean: None,
        eta_m,
        eta_sigma,
        eta_m_prev: lra_state.eta_m,
        eta_sigma_prev: lra_state.eta_sigma,
        snr_m,
        snr_sigma,
        sigma,
        eig_min: sigma * sigma * next_roots.eig_min,
        eig_max: sigma * sigma * next_roots.eig_max,
        flat_fitness: flat,
        resamples: ranked.population.resamples,
        clamped: ranked.population.clamped,
    };
    Ok(LraIteration {
        dist: next,
        cma_state: next_cma,
        lra_state: LraState {
            eta_m,
            eta_sigma,
            e_m,
            v_m,
            e_sigma,
            v_sigma,
        },
        roots: next_roots,
        report,
    })
}

/// Source of objective values for [`lra_step`].
pub trait Evaluator {
    /// Objective value used for ranking (possibly noisy).
    fn evaluate(&mut self, x: &DVector<f64>) -> f64;

    /// Value reported for the mean; `None` skips it.
    fn mean_value(&mut self, _m: &DVector<f64>) -> Option<f64> {
        None
    }
}

impl<F: FnMut(&DVector<f64>) -> f64> Evaluator for F {
    fn evaluate(&mut self, x: &DVector<f64>) -> f64 {
        self(x)
    }
}

/// One complete iteration: sample, evaluate in index order, update.
#[allow(clippy::too_many_arguments)]
pub fn lra_step<R: Rng + ?Sized, E: Evaluator + ?Sized>(
    dist: &SearchDistribution,
    params: &CmaParams,
    cma_state: &CmaState,
    mode: &LearningRate,
    lra_state: &LraState,
    roots: &SpdRoots,
    bounds: Option<&BoxBounds>,
    rng: &mut R,
    objective: &mut E,
) -> Result<LraIteration> {
    let pop: Population = sample_population(dist, params, &roots.sqrt, bounds, rng);
    let f: Vec<f64> = pop.x.iter().map(|x| objective.evaluate(x)).collect();
    let ranked = RankedPopulation::new(pop, f).map_err(|e| e.at_iteration(cma_state.t))?;
    let mut it = lra_update(dist, params, cma_state, mode, lra_state, roots, &ranked)?;
    it.report.f_mean = objective.mean_value(&it.dist.mean);
    Ok(it)
}

/// Large-dimension sphere approximation of the mean-update SNR,
/// `λ/(d−1) · (wᵀn)² / (‖w‖²‖n‖²)`, with `n_i ≈ Φ⁻¹((i − 0.375)/(λ + 0.25))`.
/// `weights` has one entry per rank (zeros beyond μ are allowed).
pub fn theoretical_sphere_snr(d: usize, weights: &[f64]) -> f64 {
    let lambda = weights.len();
    let n = order_statistic_means(lambda);
    let wn: f64 = weights.iter().zip(&n).map(|(w, ni)| w * ni).sum();
    let w_sq: f64 = weights.iter().map(|w| w * w).sum();
    let n_sq: f64 = n.iter().map(|v| v * v).sum();
    lambda as f64 / (d as f64 - 1.0) * wn * wn / (w_sq * n_sq)
}

/// Blom's approximation of `E[N_{i:λ}]` in ascending order.
pub fn order_statistic_means(lambda: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (1..=lambda)
        .map(|i| normal.inverse_cdf((i as f64 - 0.375) / (lambda as f64 + 0.25)))
        .collect()
}

/// Full-length weight vector (zeros past μ) of the default strategy.
pub fn default_rank_weights(d: usize, lambda: usize) -> Result<Vec<f64>> {
    let p = default_params(d, Some(lambda))?;
    let mut w = p.weights;
    w.resize(lambda, 0.0);
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cma::cma_step;
    use crate::linalg::sym_eig;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn iso(d: usize, var: f64) -> SearchDistribution {
        SearchDistribution::new(DVector::zeros(d), var.sqrt()).unwrap()
    }

    #[test]
    fn deltas_examples() {
        let a = iso(3, 2.0);
        let (dm, ds) = compute_deltas(&a, &a);
        assert!(dm.iter().all(|v| *v == 0.0) && ds.iter().all(|v| *v == 0.0));

        let mut b = SearchDistribution::new(DVector::zeros(2), 1.0).unwrap();
        b.mean = DVector::from_vec(vec![1.0, 2.0]);
        let (dm, _) = compute_deltas(&SearchDistribution::new(DVector::zeros(2), 1.0).unwrap(), &b);
        assert_eq!(dm.as_slice(), &[1.0, 2.0]);

        let (_, ds) = compute_deltas(&iso(2, 100.0), &iso(2, 50.0));
        let m = unvec(&ds, 2);
        assert!((m - DMatrix::identity(2, 2) * -50.0).amax() < 1e-12);
    }

    #[test]
    fn local_coordinates_equalize_constant_rate_shrinkage() {
        for d in [1, 3, 6] {
            let (s0, s1, s2) = (iso(d, 100.0), iso(d, 50.0), iso(d, 25.0));
            let (dm0, ds0) = compute_deltas(&s0, &s1);
            let (dm1, ds1) = compute_deltas(&s1, &s2);
            let l0 = to_local(&s0, &dm0, &ds0).unwrap();
            let l1 = to_local(&s1, &dm1, &ds1).unwrap();
            let expected = DMatrix::identity(d, d) * (-std::f64::consts::FRAC_1_SQRT_2 * 0.5);
            assert!((unvec(&l0.sigma, d) - &expected).amax() < 1e-12);
            assert!((unvec(&l1.sigma, d) - &expected).amax() < 1e-12);
        }
    }

    #[test]
    fn local_mean_delta_identity_and_linear() {
        let s = iso(3, 1.0);
        let dm = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let ds = DVector::zeros(9);
        let l = to_local(&s, &dm, &ds).unwrap();
        assert!((&l.m - &dm).amax() < 1e-15);

        let mut s = iso(3, 4.0);
        s.cov = SymMatrix::from_lower_fn(3, |i, j| if i == j { 1.5 } else { 0.2 });
        let a = to_local(&s, &dm, &ds).unwrap();
        let b = to_local(&s, &(&dm * 3.0), &ds).unwrap();
        assert!((&a.m * 3.0 - &b.m).amax() < 1e-12);
    }

    #[test]
    fn local_sigma_delta_is_symmetric() {
        let mut s = iso(4, 2.0);
        s.cov = SymMatrix::from_lower_fn(4, |i, j| if i == j { 2.0 + i as f64 } else { 0.1 * (i + j) as f64 });
        let ds = SymMatrix::from_lower_fn(4, |i, j| (i as f64 - j as f64 * 0.7).sin()).vec();
        let l = to_local(&s, &DVector::zeros(4), &DVector::from_vec(ds)).unwrap();
        let m = unvec(&l.sigma, 4);
        assert!((&m - m.transpose()).amax() <= 1e-12);
    }

    #[test]
    fn averages_examples() {
        let (e, v) = update_averages(&DVector::zeros(2), 0.0, &DVector::from_vec(vec![1.0, 0.0]), 0.1);
        assert!((e[0] - 0.1).abs() < 1e-15 && e[1] == 0.0);
        assert!((v - 0.1).abs() < 1e-15);

        let e0 = DVector::from_vec(vec![2.0, -1.0]);
        let (e, v) = update_averages(&e0, 3.0, &DVector::zeros(2), 0.25);
        assert_eq!(e, &e0 * 0.75);
        assert_eq!(v, 2.25);
    }

    #[test]
    fn averages_converge_geometrically() {
        let delta = DVector::from_vec(vec![0.5, -2.0, 1.0]);
        let beta = 0.1;
        let n = 200;
        let (mut e, mut v) = (DVector::zeros(3), 0.0);
        for _ in 0..n {
            (e, v) = update_averages(&e, v, &delta, beta);
        }
        let bound = (1.0 - beta).powi(n) * 1.000_001;
        assert!((&e - &delta).amax() <= bound * delta.amax());
        assert!((v - delta.norm_squared()).abs() <= bound * delta.norm_squared());
    }

    #[test]
    fn snr_examples() {
        let e = DVector::from_vec(vec![1.0, 0.0]);
        assert!((estimate_snr(&e, 2.0, 0.1) - 0.894_736_842_105_263_2).abs() < 1e-12);
        let s = estimate_snr(&DVector::zeros(3), 5.0, 0.1);
        assert!((s + 0.1 / 1.9).abs() < 1e-15);
        assert_eq!(estimate_snr(&e, 1.0, 0.1), SNR_MAX);
    }

    #[test]
    fn eta_examples() {
        let hp = LraHyperParams::default();
        let eta = 0.3;
        assert_eq!(update_eta(eta, hp.alpha * eta, &hp, 0.1), eta);

        let hp = LraHyperParams {
            gamma: 0.1,
            ..Default::default()
        };
        assert!((update_eta(0.1, 1e9, &hp, 0.1) - 0.101_005_016_708_416_8).abs() < 1e-15);
        assert_eq!(update_eta(1.0, 1e9, &hp, 0.1), 1.0);
        assert_eq!(update_eta(1e-10, -100.0, &hp, 0.1), ETA_MIN);
    }

    proptest! {
        #[test]
        fn eta_fixed_point(eta in 1e-6f64..1.0, alpha in 0.1f64..5.0, beta in 0.01f64..0.5) {
            let hp = LraHyperParams { alpha, ..Default::default() };
            prop_assert_eq!(update_eta(eta, alpha * eta, &hp, beta), eta);
        }

        #[test]
        fn eta_monotone_and_bounded(eta in 1e-6f64..1.0, s1 in -5.0f64..50.0, s2 in -5.0f64..50.0, beta in 0.01f64..0.5) {
            let hp = LraHyperParams::default();
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            let a = update_eta(eta, lo, &hp, beta);
            let b = update_eta(eta, hi, &hp, beta);
            prop_assert!(a <= b);
            for next in [a, b] {
                prop_assert!((next / eta).ln().abs() <= (hp.gamma * eta).min(beta) * (1.0 + 1e-6));
                prop_assert!(next <= 1.0);
            }
        }
    }

    #[test]
    fn apply_examples() {
        let mut old = iso(2, 1.0);
        old.cov = SymMatrix::from_diagonal(&[2.0, 0.5]);
        let dm = DVector::from_vec(vec![2.0, 0.0]);
        let ds = DVector::from_vec(vec![0.1, 0.0, 0.0, -0.2]);
        let (m, s, _) = apply_updates(&old, &dm, &ds, 0.5, 1.0).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 0.0]);
        assert!((s.get(0, 0) - 2.1).abs() < 1e-15 && (s.get(1, 1) - 0.3).abs() < 1e-15);
        let (_, s, _) = apply_updates(&old, &dm, &ds, 1.0, 0.0).unwrap();
        assert_eq!(s, old.sigma_matrix());
    }

    #[test]
    fn decompose_examples() {
        let (s, c) = decompose(&SymMatrix::identity(2).scale(4.0)).unwrap();
        assert!((s - 2.0).abs() < 1e-14);
        assert!((c.as_matrix() - DMatrix::identity(2, 2)).amax() < 1e-14);
        let (s, c) = decompose(&SymMatrix::identity(3)).unwrap();
        assert!((s - 1.0).abs() < 1e-15 && (c.as_matrix() - DMatrix::identity(3, 3)).amax() < 1e-15);
        let (s, c) = decompose(&SymMatrix::from_diagonal(&[1.0, 4.0])).unwrap();
        assert!((s - 2f64.sqrt()).abs() < 1e-14);
        assert!((c.get(0, 0) - 0.5).abs() < 1e-14 && (c.get(1, 1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn decompose_survives_tiny_determinants() {
        let sigma = SymMatrix::identity(40).scale(1e-20);
        let (s, c) = decompose(&sigma).unwrap();
        assert!((s / 1e-10 - 1.0).abs() < 1e-10);
        let det: f64 = sym_eig(&c).unwrap().eigenvalues.iter().product();
        assert!((det - 1.0).abs() < 1e-8);
    }

    #[test]
    fn stepsize_correction_examples() {
        assert_eq!(correct_stepsize(2.0, 0.4, 0.4), 2.0);
        assert_eq!(correct_stepsize(1.0, 0.2, 0.1), 2.0);
        assert_eq!(correct_stepsize(3.0, 0.1, 0.2), 1.5);
    }

    #[test]
    fn fixed_unit_rates_reproduce_plain_cma() {
        let d = 6;
        let params = default_params(d, None).unwrap();
        let sphere = |x: &DVector<f64>| x.norm_squared();
        let mut plain = SearchDistribution::new(DVector::from_element(d, 3.0), 2.0).unwrap();
        let mut plain_state = CmaState::new(d);
        let mut rng_a = ChaCha8Rng::seed_from_u64(11);

        let mode = LearningRate::Fixed {
            eta_m: 1.0,
            eta_sigma: 1.0,
        };
        let mut dist = plain.clone();
        let mut cma_state = CmaState::new(d);
        let mut lra_state = LraState::for_mode(d, &mode);
        let mut roots = spd_roots(&dist.cov).unwrap();
        let mut rng_b = ChaCha8Rng::seed_from_u64(11);
        let mut f = sphere;

        for _ in 0..150 {
            let it = cma_step(&plain, &params, &plain_state, &mut rng_a, sphere).unwrap();
            plain = it.dist;
            plain_state = it.state;

            let it = lra_step(
                &dist, &params, &cma_state, &mode, &lra_state, &roots, None, &mut rng_b, &mut f,
            )
            .unwrap();
            dist = it.dist;
            cma_state = it.cma_state;
            lra_state = it.lra_state;
            roots = it.roots;
            assert_eq!(dist, plain);
            assert_eq!(cma_state, plain_state);
        }
    }

    #[test]
    fn theoretical_snr_matches_hand_evaluation() {
        // λ = 4, μ = 2: w = (ln 2.5, ln 2.5 − ln 2)/Σ, n from Blom
        let w = default_rank_weights(10, 4).unwrap();
        assert_eq!(w.len(), 4);
        let n = order_statistic_means(4);
        let normal = Normal::new(0.0, 1.0).unwrap();
        assert!((n[0] - normal.inverse_cdf(0.625 / 4.25)).abs() < 1e-15);
        assert!((n[0] + n[3]).abs() < 1e-12);
        let wn = w[0] * n[0] + w[1] * n[1];
        let expected = 4.0 / 9.0 * wn * wn / ((w[0] * w[0] + w[1] * w[1]) * n.iter().map(|v| v * v).sum::<f64>());
        assert!((theoretical_sphere_snr(10, &w) - expected).abs() < 1e-15);
    }

    #[test]
    fn nonnegative_weights_keep_alignment_below_half() {
        // With nonnegative weights on the best half, Cauchy–Schwarz bounds
        // (wᵀn)²/(‖w‖²‖n‖²) by Σ_{i≤μ} n_i² / Σ n_i² = 1/2.
        for (d, lambda) in [(10, 10), (30, 14), (40, 15), (30, 70)] {
            let w = default_rank_weights(d, lambda).unwrap();
            let ratio = theoretical_sphere_snr(d, &w) * (d as f64 - 1.0) / lambda as f64;
            assert!(ratio <= 0.5 + 1e-12, "ratio {ratio}");
            assert!(ratio > 0.4);
        }
    }
}
