//! One iteration of standard CMA-ES as a pure transition.
//!
//! Sampling, ranking, path cumulation and the proposed `(m, σ, C)` update are
//! separate functions so the learning-rate wrapper in [`crate::lra`] can
//! intercept the proposal before it is applied.
//!
//! The parent number is `μ = ⌊λ/2⌋` with positive log-weights; this is the
//! usual recommendation and is assumed rather than prescribed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{spd_roots, SpdRoots, SymMatrix};

/// Gaussian search distribution `N(m, σ² C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchDistribution {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: SymMatrix,
}

impl SearchDistribution {
    /// `N(mean, σ² I)`.
    pub fn new(mean: DVector<f64>, sigma: f64) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("initial mean must be finite".into()));
        }
        let dist = SearchDistribution {
            mean,
            sigma,
            cov: SymMatrix::identity(d),
        };
        dist.validate()?;
        Ok(dist)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `Σ = σ² C`.
    pub fn sigma_matrix(&self) -> SymMatrix {
        self.cov.scale(self.sigma * self.sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::NumericalRange(format!("step-size {:e}", self.sigma)));
        }
        if self.mean.iter().any(|v| !v.is_finite()) || !self.cov.is_finite() {
            return Err(Error::NumericalRange("non-finite distribution parameters".into()));
        }
        if self.cov.dim() != self.dim() {
            return Err(Error::InvalidInput("mean and covariance dimensions differ".into()));
        }
        Ok(())
    }
}

/// Strategy constants.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaParams {
    pub dim: usize,
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mu_w: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub c_m: f64,
    /// Approximation of `E‖N(0, I)‖`.
    pub chi_d: f64,
}

pub fn default_lambda(d: usize) -> usize {
    4 + (3.0 * (d as f64).ln()).floor() as usize
}

pub fn default_params(d: usize, lambda: Option<usize>) -> Result<CmaParams> {
    if d == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    let lambda = lambda.unwrap_or_else(|| default_lambda(d));
    if lambda < 2 {
        return Err(Error::InvalidConfig(format!("lambda must be at least 2, got {lambda}")));
    }
    let mu = lambda / 2;
    let n = d as f64;

    let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mu_w = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let c_sigma = (mu_w + 2.0) / (n + mu_w + 5.0);
    let d_sigma = 1.0 + 2.0 * (((mu_w - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_c = (4.0 + mu_w / n) / (n + 4.0 + 2.0 * mu_w / n);
    let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_w);
    let c_mu = (1.0 - c_1).min(2.0 * (mu_w - 2.0 + 1.0 / mu_w) / ((n + 2.0).powi(2) + mu_w));
    let chi_d = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    Ok(CmaParams {
        dim: d,
        lambda,
        mu,
        weights,
        mu_w,
        c_sigma,
        d_sigma,
        c_c,
        c_1,
        c_mu,
        c_m: 1.0,
        chi_d,
    })
}

/// Evolution paths and iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaState {
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    pub t: u64,
}

impl CmaState {
    pub fn new(d: usize) -> Self {
        CmaState {
            p_sigma: DVector::zeros(d),
            p_c: DVector::zeros(d),
            t: 0,
        }
    }
}

/// Axis-aligned box used for feasibility resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lower: f64,
    pub upper: f64,
}

impl BoxBounds {
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.iter().all(|v| *v >= self.lower && *v <= self.upper)
    }

    pub fn clamp(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(|v| v.clamp(self.lower, self.upper))
    }
}

pub const MAX_RESAMPLES: usize = 100;

/// Candidates of one iteration with their generating vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub z: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub x: Vec<DVector<f64>>,
    /// Extra normal vectors drawn to replace infeasible candidates.
    pub resamples: usize,
    /// Candidates that stayed infeasible and were clamped into the box.
    pub clamped: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

pub fn draw_z<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// `y = √C z`, `x = m + σ y` for given standard normal vectors.
pub fn population_from_z(dist: &SearchDistribution, sqrt_c: &SymMatrix, z: Vec<DVector<f64>>) -> Population {
    let y: Vec<DVector<f64>> = z.iter().map(|zi| sqrt_c.as_matrix() * zi).collect();
    let x = y.iter().map(|yi| &dist.mean + yi * dist.sigma).collect();
    Population {
        z,
        y,
        x,
        resamples: 0,
        clamped: 0,
    }
}

/// Draws λ candidates. Normal variates are consumed candidate by candidate and,
/// within a candidate, coordinate by coordinate. With bounds, an infeasible
/// candidate is redrawn immediately (up to [`MAX_RESAMPLES`] times) before the
/// next candidate; if it is still infeasible its `x` is clamped into the box
/// while `z` and `y` keep the last draw.
pub fn sample_population<R: Rng + ?Sized>(
    dist: &SearchDistribution,
    params: &CmaParams,
    sqrt_c: &SymMatrix,
    bounds: Option<&BoxBounds>,
    rng: &mut R,
) -> Population {
    let d = dist.dim();
    let sqrt_c = sqrt_c.as_matrix();
    let mut pop = Population {
        z: Vec::with_capacity(params.lambda),
        y: Vec::with_capacity(params.lambda),
        x: Vec::with_capacity(params.lambda),
        resamples: 0,
        clamped: 0,
    };
    for _ in 0..params.lambda {
        let mut attempts = 0;
        loop {
            let z = draw_z(d, rng);
            let y = sqrt_c * &z;
            let x = &dist.mean + &y * dist.sigma;
            match bounds {
                Some(b) if !b.contains(&x) => {
                    if attempts < MAX_RESAMPLES {
                        attempts += 1;
                        pop.resamples += 1;
                        continue;
                    }
                    pop.clamped += 1;
                    pop.x.push(b.clamp(&x));
                }
                _ => pop.x.push(x),
            }
            pop.z.push(z);
            pop.y.push(y);
            break;
        }
    }
    pop
}

/// Stable ascending order of sample indices (0-based); ties keep index order.
pub fn rank(f_values: &[f64]) -> Result<Vec<usize>> {
    if let Some(index) = f_values.iter().position(|v| v.is_nan()) {
        return Err(Error::ObjectiveNaN { index });
    }
    let mut order: Vec<usize> = (0..f_values.len()).collect();
    order.sort_by(|&a, &b| f_values[a].total_cmp(&f_values[b]));
    Ok(order)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPopulation {
    pub population: Population,
    pub f_values: Vec<f64>,
    pub order: Vec<usize>,
}

impl RankedPopulation {
    pub fn new(population: Population, f_values: Vec<f64>) -> Result<Self> {
        if f_values.len() != population.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} objective values, got {}",
                population.len(),
                f_values.len()
            )));
        }
        let order = rank(&f_values)?;
        Ok(RankedPopulation {
            population,
            f_values,
            order,
        })
    }

    pub fn best_f(&self) -> f64 {
        self.f_values[self.order[0]]
    }

    pub fn best_x(&self) -> &DVector<f64> {
        &self.population.x[self.order[0]]
    }

    /// `(dz, dy)`: weighted sums over the μ best `z` and `y`.
    pub fn weighted_steps(&self, params: &CmaParams) -> (DVector<f64>, DVector<f64>) {
        let d = self.population.z[0].len();
        let mut dz = DVector::zeros(d);
        let mut dy = DVector::zeros(d);
        for (w, &idx) in params.weights.iter().zip(&self.order) {
            dz.axpy(*w, &self.population.z[idx], 1.0);
            dy.axpy(*w, &self.population.y[idx], 1.0);
        }
        (dz, dy)
    }
}

/// Heaviside threshold on `‖p_σ‖² / (1 − (1 − c_σ)^{2(t+1)})`.
pub fn hsig_threshold(d: usize) -> f64 {
    let n = d as f64;
    (2.0 + 4.0 / (n + 1.0)) * n
}

/// Cumulates both evolution paths. Returns the new paths (with `t` unchanged)
/// and the stall indicator `h_σ`.
pub fn update_paths(state: &CmaState, params: &CmaParams, dz: &DVector<f64>, dy: &DVector<f64>) -> (CmaState, bool) {
    let cs = params.c_sigma;
    let cc = params.c_c;
    let p_sigma = &state.p_sigma * (1.0 - cs) + dz * (cs * (2.0 - cs) * params.mu_w).sqrt();

    let norm_sq = p_sigma.norm_squared() / (1.0 - (1.0 - cs).powf(2.0 * (state.t as f64 + 1.0)));
    let h_sigma = norm_sq < hsig_threshold(params.dim);

    let mut p_c = &state.p_c * (1.0 - cc);
    if h_sigma {
        p_c.axpy((cc * (2.0 - cc) * params.mu_w).sqrt(), dy, 1.0);
    }
    (
        CmaState {
            p_sigma,
            p_c,
            t: state.t,
        },
        h_sigma,
    )
}

pub fn next_sigma(sigma: f64, params: &CmaParams, p_sigma_norm: f64) -> f64 {
    let exponent = (params.c_sigma / params.d_sigma) * (p_sigma_norm / params.chi_d - 1.0);
    sigma * exponent.min(1.0).exp()
}

/// The plain CMA-ES proposal for the next distribution.
pub fn propose_update(
    dist: &SearchDistribution,
    params: &CmaParams,
    state: &CmaState,
    ranked: &RankedPopulation,
) -> Result<(SearchDistribution, CmaState)> {
    let (dz, dy) = ranked.weighted_steps(params);
    let (new_state, h_sigma) = update_paths(state, params, &dz, &dy);

    let mean = &dist.mean + &dy * (params.c_m * dist.sigma);
    let sigma = next_sigma(dist.sigma, params, new_state.p_sigma.norm());

    let c = dist.cov.as_matrix();
    let stall = if h_sigma {
        0.0
    } else {
        params.c_1 * params.c_c * (2.0 - params.c_c)
    };
    let weight_sum: f64 = params.weights.iter().sum();
    let keep = 1.0 + stall - params.c_1 - params.c_mu * weight_sum;

    let d = dist.dim();
    let mut ys = DMatrix::zeros(d, params.mu);
    for (k, (w, &idx)) in params.weights.iter().zip(&ranked.order).enumerate() {
        ys.set_column(k, &(&ranked.population.y[idx] * w.sqrt()));
    }
    let rank_mu = &ys * ys.transpose();
    let rank_one = &new_state.p_c * new_state.p_c.transpose();
    let next_c = c * keep + rank_one * params.c_1 + rank_mu * params.c_mu;
    let cov = SymMatrix::symmetrize(&next_c);

    let proposed = SearchDistribution { mean, sigma, cov };
    proposed.validate().map_err(|e| e.at_iteration(state.t))?;
    Ok((proposed, new_state))
}

/// Result of a full plain CMA-ES iteration.
#[derive(Debug, Clone)]
pub struct CmaIteration {
    pub ranked: RankedPopulation,
    pub dist: SearchDistribution,
    pub state: CmaState,
}

/// Sample, evaluate in index order, rank, propose; increments `t`.
pub fn cma_step<R: Rng + ?Sized>(
    dist: &SearchDistribution,
    params: &CmaParams,
    state: &CmaState,
    rng: &mut R,
    mut objective: impl FnMut(&DVector<f64>) -> f64,
) -> Result<CmaIteration> {
    let roots: SpdRoots = spd_roots(&dist.cov).map_err(|e| e.at_iteration(state.t))?;
    let pop = sample_population(dist, params, &roots.sqrt, None, rng);
    let f: Vec<f64> = pop.x.iter().map(&mut objective).collect();
    let ranked = RankedPopulation::new(pop, f).map_err(|e| e.at_iteration(state.t))?;
    let (next, mut next_state) = propose_update(dist, params, state, &ranked)?;
    next_state.t += 1;
    Ok(CmaIteration {
        ranked,
        dist: next,
        state: next_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spd_roots;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_lambda_values() {
        assert_eq!(default_params(40, None).unwrap().lambda, 15);
        assert_eq!(default_params(10, None).unwrap().lambda, 10);
        assert_eq!(default_params(30, None).unwrap().lambda, 14);
        assert_eq!(default_params(1, None).unwrap().lambda, 4);
    }

    #[test]
    fn chi_d_for_ten() {
        let p = default_params(10, None).unwrap();
        // √10·(1 − 1/40 + 1/2100)
        assert!((p.chi_d - 3.084_726_565_169_012).abs() < 1e-12);
    }

    #[test]
    fn lambda_below_two_rejected() {
        assert!(matches!(default_params(5, Some(1)), Err(Error::InvalidConfig(_))));
        assert!(matches!(default_params(0, None), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn params_invariants() {
        for d in [1, 2, 5, 10, 30, 40, 100] {
            for lambda in [None, Some(2), Some(14), Some(70), Some(500)] {
                let p = default_params(d, lambda).unwrap();
                assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(p.weights.windows(2).all(|w| w[0] >= w[1]));
                assert!(*p.weights.last().unwrap() > 0.0);
                let mu_w = 1.0 / p.weights.iter().map(|w| w * w).sum::<f64>();
                assert!((p.mu_w - mu_w).abs() < 1e-12);
                assert!(p.c_1 + p.c_mu <= 1.0);
                assert!(p.c_sigma > 0.0 && p.c_sigma <= 1.0);
                assert!(p.c_c > 0.0 && p.c_c <= 1.0);
                assert_eq!(p.mu, p.lambda / 2);
            }
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&[3.0, 1.0, 2.0]).unwrap(), vec![1, 2, 0]);
        assert_eq!(rank(&[5.0, 5.0, 1.0]).unwrap(), vec![2, 0, 1]);
        assert_eq!(rank(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0, 1, 2, 3]);
        assert!(matches!(rank(&[1.0, f64::NAN]), Err(Error::ObjectiveNaN { index: 1 })));
    }

    #[test]
    fn identity_shape_gives_y_equal_z() {
        let dist = SearchDistribution::new(DVector::from_element(4, 1.0), 0.1).unwrap();
        let params = default_params(4, None).unwrap();
        let roots = spd_roots(&dist.cov).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = sample_population(&dist, &params, &roots.sqrt, None, &mut rng);
        for (z, y) in pop.z.iter().zip(&pop.y) {
            assert_eq!(z, y);
        }
    }

    #[test]
    fn sample_scales_linearly() {
        let mut dist = SearchDistribution::new(DVector::zeros(3), 0.1).unwrap();
        dist.cov = SymMatrix::from_diagonal(&[4.0, 1.0, 9.0]);
        let roots = spd_roots(&dist.cov).unwrap();
        let z = vec![DVector::from_vec(vec![1.0, -2.0, 0.5])];
        let pop = population_from_z(&dist, &roots.sqrt, z);
        let expected = [0.2, -0.2, 0.15];
        for (a, b) in pop.x[0].iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let dist = SearchDistribution::new(DVector::from_element(5, 3.0), 2.0).unwrap();
        let params = default_params(5, None).unwrap();
        let roots = spd_roots(&dist.cov).unwrap();
        let a = sample_population(&dist, &params, &roots.sqrt, None, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_population(&dist, &params, &roots.sqrt, None, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn bounded_sampling_stays_feasible() {
        let dist = SearchDistribution::new(DVector::from_element(3, 15.5), 14.5).unwrap();
        let params = default_params(3, Some(50)).unwrap();
        let roots = spd_roots(&dist.cov).unwrap();
        let b = BoxBounds {
            lower: 1.0,
            upper: 30.0,
        };
        let pop = sample_population(&dist, &params, &roots.sqrt, Some(&b), &mut ChaCha8Rng::seed_from_u64(2));
        assert!(pop.x.iter().all(|x| b.contains(x)));
        assert!(pop.resamples > 0);

        // far outside: forced to clamp
        let far = SearchDistribution::new(DVector::from_element(3, 1000.0), 1.0).unwrap();
        let pop = sample_population(&far, &params, &roots.sqrt, Some(&b), &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(pop.clamped, params.lambda);
        assert_eq!(pop.resamples, params.lambda * MAX_RESAMPLES);
        assert!(pop.x.iter().all(|x| x.iter().all(|v| *v == 30.0)));
    }

    #[test]
    fn zero_path_update() {
        let p = default_params(10, None).unwrap();
        let st = CmaState::new(10);
        let dz = DVector::from_fn(10, |i, _| i as f64 * 0.1);
        let dy = dz.clone();
        let (next, h) = update_paths(&st, &p, &dz, &dy);
        let k = (p.c_sigma * (2.0 - p.c_sigma) * p.mu_w).sqrt();
        assert!((next.p_sigma - &dz * k).amax() < 1e-15);
        assert!(h);
        assert_eq!(next.t, 0);
    }

    #[test]
    fn heaviside_threshold_ten() {
        assert!((hsig_threshold(10) - 23.636_363_636_363_637).abs() < 1e-12);
    }

    #[test]
    fn closed_gate_ignores_dy() {
        let p = default_params(10, None).unwrap();
        let mut st = CmaState::new(10);
        st.p_c = DVector::from_element(10, 1.0);
        let dz = DVector::from_element(10, 100.0);
        let dy = DVector::from_element(10, 5.0);
        let (next, h) = update_paths(&st, &p, &dz, &dy);
        assert!(!h);
        assert_eq!(next.p_c, DVector::from_element(10, 1.0 - p.c_c));
    }

    #[test]
    fn sigma_update_neutral_and_clamped() {
        let p = default_params(10, None).unwrap();
        assert_eq!(next_sigma(2.0, &p, p.chi_d), 2.0);
        let big = p.chi_d * (1.0 + 3.0 * p.d_sigma / p.c_sigma);
        assert!((next_sigma(2.0, &p, big) - 2.0 * std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn frozen_covariance_when_rates_zero() {
        let mut p = default_params(4, None).unwrap();
        p.c_1 = 0.0;
        p.c_mu = 0.0;
        let mut dist = SearchDistribution::new(DVector::from_element(4, 1.0), 0.5).unwrap();
        dist.cov = SymMatrix::from_lower_fn(4, |i, j| if i == j { 2.0 } else { 0.3 });
        let roots = spd_roots(&dist.cov).unwrap();
        let pop = sample_population(&dist, &p, &roots.sqrt, None, &mut ChaCha8Rng::seed_from_u64(5));
        let f: Vec<f64> = pop.x.iter().map(|x| x.norm_squared()).collect();
        let ranked = RankedPopulation::new(pop, f).unwrap();
        let st = CmaState::new(4);
        let (next, _) = propose_update(&dist, &p, &st, &ranked).unwrap();
        assert_eq!(next.cov, dist.cov);
    }
}
