use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::mcmc::{run_chain, ChainSettings};
use crate::bounds::structural_covariance;
use crate::covariance::{compute_kappas, compute_regression_vectors, sample_covariance, CovarianceOptions, Dataset};
use crate::error::{Error, Result};
use crate::inference::two_stage_least_squares;
use crate::rng::stream_rng;

/// How the direction `b` and radius fraction κ map to γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaEncoding {
    /// γ = b·√(κτ/‖b‖²), so ‖γ‖₂ = √(κτ).
    #[default]
    AsPrinted,
    /// γ = b·κτ/‖b‖, so ‖γ‖₂ = κτ ≤ τ.
    LinearRadius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesPriors {
    pub v_beta: f64,
    pub v_b: f64,
    pub v_theta: f64,
    /// Log-normal location/variance for each η_z² (on the log scale).
    pub l_mu_z: f64,
    pub l_v_z: f64,
    pub l_mu_x: f64,
    pub l_v_x: f64,
    pub l_mu_y: f64,
    pub l_v_y: f64,
}

impl Default for BayesPriors {
    fn default() -> Self {
        Self { v_beta: 10.0, v_b: 10.0, v_theta: 10.0, l_mu_z: 0.0, l_v_z: 1.0, l_mu_x: 0.0, l_v_x: 1.0, l_mu_y: 0.0, l_v_y: 1.0 }
    }
}

/// Initial random-walk scales per parameter block (tuned during adaptation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub beta: f64,
    pub b: f64,
    pub w_kappa: f64,
    pub w_rho: f64,
    pub theta: f64,
    pub log_var_z: f64,
    pub log_var_x: f64,
    pub log_var_y: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self { beta: 0.05, b: 0.5, w_kappa: 0.5, w_rho: 0.3, theta: 0.05, log_var_z: 0.05, log_var_x: 0.05, log_var_y: 0.05 }
    }
}

impl StepSizes {
    fn to_vec(self) -> Vec<f64> {
        vec![self.beta, self.b, self.w_kappa, self.w_rho, self.theta, self.log_var_z, self.log_var_x, self.log_var_y]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesConfig {
    /// L2 budget on γ.
    pub tau: f64,
    pub priors: BayesPriors,
    pub chain: ChainSettings,
    pub steps: StepSizes,
    pub encoding: GammaEncoding,
    /// Drop the likelihood and sample the prior (diagnostics).
    pub prior_only: bool,
    pub seed: u64,
}

impl Default for BayesConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            priors: BayesPriors::default(),
            chain: ChainSettings::default(),
            steps: StepSizes::default(),
            encoding: GammaEncoding::AsPrinted,
            prior_only: false,
            seed: 0,
        }
    }
}

impl BayesConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.priors;
        let variances = [p.v_beta, p.v_b, p.v_theta, p.l_v_z, p.l_v_x, p.l_v_y];
        if variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("prior variances must be positive"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid("tau must be positive"));
        }
        if self.chain.n_iter == 0 {
            return Err(Error::invalid("n_iter must be positive"));
        }
        Ok(())
    }
}

/// One point of the parameter space; variances are stored on the log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesState {
    pub beta: DVector<f64>,
    pub b: DVector<f64>,
    pub w_kappa: f64,
    pub w_rho: f64,
    pub theta: f64,
    pub log_var_z: DVector<f64>,
    pub log_var_x: f64,
    pub log_var_y: f64,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

impl BayesState {
    pub fn d_z(&self) -> usize {
        self.beta.len()
    }

    /// κ = Φ(w_κ) ∈ (0, 1).
    pub fn kappa(&self) -> f64 {
        std_normal_cdf(self.w_kappa)
    }

    /// ρ = 2Φ(w_ρ) − 1 ∈ (−1, 1).
    pub fn rho(&self) -> f64 {
        2.0 * std_normal_cdf(self.w_rho) - 1.0
    }

    pub fn gamma(&self, tau: f64, encoding: GammaEncoding) -> DVector<f64> {
        let bb = self.b.norm_squared();
        if bb == 0.0 {
            return DVector::zeros(self.d_z());
        }
        let kt = self.kappa() * tau;
        match encoding {
            GammaEncoding::AsPrinted => &self.b * (kt / bb).sqrt(),
            GammaEncoding::LinearRadius => &self.b * (kt / bb.sqrt()),
        }
    }

    fn layout(d: usize) -> Vec<Range<usize>> {
        vec![0..d, d..2 * d, 2 * d..2 * d + 1, 2 * d + 1..2 * d + 2, 2 * d + 2..2 * d + 3, 2 * d + 3..3 * d + 3, 3 * d + 3..3 * d + 4, 3 * d + 4..3 * d + 5]
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.d_z() + 5);
        v.extend(self.beta.iter());
        v.extend(self.b.iter());
        v.extend([self.w_kappa, self.w_rho, self.theta]);
        v.extend(self.log_var_z.iter());
        v.extend([self.log_var_x, self.log_var_y]);
        v
    }

    fn from_flat(v: &[f64], d: usize) -> Self {
        Self {
            beta: DVector::from_column_slice(&v[0..d]),
            b: DVector::from_column_slice(&v[d..2 * d]),
            w_kappa: v[2 * d],
            w_rho: v[2 * d + 1],
            theta: v[2 * d + 2],
            log_var_z: DVector::from_column_slice(&v[2 * d + 3..3 * d + 3]),
            log_var_x: v[3 * d + 3],
            log_var_y: v[3 * d + 4],
        }
    }
}

/// Σ(Θ) in `[Z.., X, Y]` order, with diagonal Σ_zz and
/// Σ_xy = θΣ_xx + γ·Σ_zx + ρη_xη_y.
pub fn model_covariance(state: &BayesState, tau: f64, encoding: GammaEncoding) -> DMatrix<f64> {
    let sigma_zz = DMatrix::from_diagonal(&state.log_var_z.map(f64::exp));
    let gamma = state.gamma(tau, encoding);
    let eta_x = (0.5 * state.log_var_x).exp();
    let eta_y = (0.5 * state.log_var_y).exp();
    structural_covariance(&sigma_zz, &state.beta, &gamma, state.theta, state.rho(), eta_x, eta_y)
}

/// Uncentered cross-product DᵀD of the column-centered data.
pub fn suffstat(data: &Dataset) -> DMatrix<f64> {
    let m = data.matrix();
    let means = DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.mean()));
    let mut centered = m.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    centered.transpose() * centered
}

/// −½ tr(Σ⁻¹S) − ½ n log|Σ|; −∞ when Σ is not positive definite.
pub fn log_likelihood(sigma: &DMatrix<f64>, suffstat: &DMatrix<f64>, n: usize) -> f64 {
    let Some(chol) = Cholesky::new(sigma.clone()) else {
        return f64::NEG_INFINITY;
    };
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let trace = chol.solve(suffstat).trace();
    -0.5 * trace - 0.5 * n as f64 * log_det
}

fn log_prior(state: &BayesState, p: &BayesPriors) -> f64 {
    let gauss = |x: f64, mean: f64, var: f64| -0.5 * (x - mean).powi(2) / var;
    state.beta.iter().map(|&v| gauss(v, 0.0, p.v_beta)).sum::<f64>()
        + state.b.iter().map(|&v| gauss(v, 0.0, p.v_b)).sum::<f64>()
        + gauss(state.w_kappa, 0.0, 1.0)
        + gauss(state.w_rho, 0.0, 1.0)
        + gauss(state.theta, 0.0, p.v_theta)
        + state.log_var_z.iter().map(|&v| gauss(v, p.l_mu_z, p.l_v_z)).sum::<f64>()
        + gauss(state.log_var_x, p.l_mu_x, p.l_v_x)
        + gauss(state.log_var_y, p.l_mu_y, p.l_v_y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesPosterior {
    pub theta: Vec<f64>,
    pub kappa: Vec<f64>,
    pub rho: Vec<f64>,
    /// Acceptance rate per block, in the order beta, b, w_kappa, w_rho, theta, log_var_z, log_var_x, log_var_y.
    pub acceptance: Vec<f64>,
    pub steps: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<BayesState>,
}

impl BayesPosterior {
    /// Posterior quantiles (q_{α/2}, q_{1−α/2}) of θ, read as lower/upper "bounds".
    pub fn credible_bounds(&self, alpha: f64) -> (f64, f64) {
        let mut t = self.theta.clone();
        t.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = (t.len() - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(t.len() - 1);
            t[lo] + (h - lo as f64) * (t[hi] - t[lo])
        };
        (q(alpha / 2.0), q(1.0 - alpha / 2.0))
    }
}

fn initial_state(data: &Dataset, config: &BayesConfig) -> BayesState {
    let d = data.d_z();
    let fallback = BayesState {
        beta: DVector::zeros(d),
        b: DVector::from_element(d, 1.0),
        w_kappa: 0.0,
        w_rho: 0.0,
        theta: 0.0,
        log_var_z: DVector::from_element(d, config.priors.l_mu_z),
        log_var_x: config.priors.l_mu_x,
        log_var_y: config.priors.l_mu_y,
    };
    if config.prior_only {
        return fallback;
    }
    // Moment-based start: first-stage weights, 2SLS effect, residual scales.
    let start = || -> Result<BayesState> {
        let blocks = sample_covariance(data, &CovarianceOptions::default())?;
        let k = compute_kappas(&blocks)?;
        let v = compute_regression_vectors(&blocks)?;
        let theta = two_stage_least_squares(&blocks)?;
        let resid_y = (k.kappa_yy - 2.0 * theta * k.kappa_xy + theta * theta * k.kappa_xx).max(1e-6);
        let mut b = &v.alpha - &v.beta * theta;
        if b.norm() < 1e-8 {
            b = DVector::from_element(d, 1.0);
        }
        Ok(BayesState {
            beta: v.beta,
            b,
            w_kappa: 0.0,
            w_rho: 0.0,
            theta,
            log_var_z: blocks.sigma_zz.diagonal().map(f64::ln),
            log_var_x: k.kappa_xx.ln(),
            log_var_y: resid_y.ln(),
        })
    };
    start().unwrap_or(fallback)
}

/// Random-walk Metropolis–Hastings over the full parameter vector.
pub fn run_mh(data: &Dataset, config: &BayesConfig) -> Result<BayesPosterior> {
    config.validate()?;
    let d = data.d_z();
    let s = suffstat(data);
    let n = data.n();
    let log_post = |flat: &[f64]| {
        let state = BayesState::from_flat(flat, d);
        let prior = log_prior(&state, &config.priors);
        if config.prior_only {
            return prior;
        }
        let sigma = model_covariance(&state, config.tau, config.encoding);
        prior + log_likelihood(&sigma, &s, n)
    };
    let mut init = initial_state(data, config);
    if !log_post(&init.to_flat()).is_finite() {
        init = initial_state(data, &BayesConfig { prior_only: true, ..config.clone() });
    }
    let mut rng = stream_rng(config.seed, 0);
    let out = run_chain(log_post, init.to_flat(), &BayesState::layout(d), config.steps.to_vec(), &config.chain, &mut rng)?;
    let states: Vec<BayesState> = out.draws.iter().map(|v| BayesState::from_flat(v, d)).collect();
    Ok(BayesPosterior {
        theta: states.iter().map(|s| s.theta).collect(),
        kappa: states.iter().map(BayesState::kappa).collect(),
        rho: states.iter().map(BayesState::rho).collect(),
        acceptance: out.acceptance,
        steps: out.steps,
        states,
    })
}

/// Independent chains in parallel; chain k runs with seed `child_seed(config.seed, k)`.
pub fn run_chains(data: &Dataset, config: &BayesConfig, chains: usize) -> Result<Vec<BayesPosterior>> {
    use rayon::prelude::*;
    if chains == 0 {
        return Err(Error::invalid("at least one chain is required"));
    }
    (0..chains)
        .into_par_iter()
        .map(|k| run_mh(data, &BayesConfig { seed: crate::rng::child_seed(config.seed, k as u64), ..config.clone() }))
        .collect()
}

/// Kolmogorov–Smirnov statistic of `sample` against N(mean, var).
#[cfg(test)]
pub(crate) fn ks_statistic_normal(sample: &[f64], mean: f64, var: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::new(mean, var.sqrt()).expect("valid normal");
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal.cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{generate_dataset, SimConfig};

    fn random_state(d: usize, seed: u64) -> BayesState {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let mut rng = stream_rng(seed, 7);
        let mut g = || rng.sample::<f64, _>(StandardNormal);
        BayesState {
            beta: DVector::from_fn(d, |_, _| g()),
            b: DVector::from_fn(d, |_, _| g()),
            w_kappa: g(),
            w_rho: g(),
            theta: g(),
            log_var_z: DVector::from_fn(d, |_, _| 0.3 * g()),
            log_var_x: 0.3 * g(),
            log_var_y: 0.3 * g(),
        }
    }

    #[test]
    fn trivial_state_is_block_diagonal() {
        let mut s = random_state(3, 1);
        s.beta.fill(0.0);
        s.b.fill(0.0);
        s.theta = 0.0;
        s.w_rho = 0.0;
        let m = model_covariance(&s, 1.0, GammaEncoding::AsPrinted);
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert_eq!(m[(i, j)], 0.0);
                }
            }
        }
        assert!((m[(3, 3)] - s.log_var_x.exp()).abs() < 1e-14);
    }

    #[test]
    fn encodings_have_the_stated_norms() {
        let s = random_state(4, 2);
        let tau = 2.5;
        let k = s.kappa();
        assert!((s.gamma(tau, GammaEncoding::AsPrinted).norm() - (k * tau).sqrt()).abs() < 1e-12);
        assert!((s.gamma(tau, GammaEncoding::LinearRadius).norm() - k * tau).abs() < 1e-12);
    }

    #[test]
    fn printed_xy_entry_differs_by_the_first_stage_term() {
        // The printed Σ_xy = Σ_zx·γ + η_x²θ + ρη_xη_y omits θ·β·Σ_zz·β.
        let s = random_state(3, 3);
        let m = model_covariance(&s, 1.0, GammaEncoding::AsPrinted);
        let szz = DMatrix::from_diagonal(&s.log_var_z.map(f64::exp));
        let szx = &szz * &s.beta;
        let gamma = s.gamma(1.0, GammaEncoding::AsPrinted);
        let (ex, ey) = ((0.5 * s.log_var_x).exp(), (0.5 * s.log_var_y).exp());
        let printed = szx.dot(&gamma) + ex * ex * s.theta + s.rho() * ex * ey;
        assert!((m[(3, 4)] - printed - s.theta * s.beta.dot(&szx)).abs() < 1e-12);
        assert!((m[(3, 3)] - s.beta.dot(&szx) - ex * ex).abs() < 1e-12);
    }

    #[test]
    fn model_covariance_matches_forward_simulation() {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let s = random_state(2, 4);
        let m = model_covariance(&s, 1.5, GammaEncoding::AsPrinted);
        let gamma = s.gamma(1.5, GammaEncoding::AsPrinted);
        let sd_z = s.log_var_z.map(|v| (0.5 * v).exp());
        let (ex, ey, rho) = ((0.5 * s.log_var_x).exp(), (0.5 * s.log_var_y).exp(), s.rho());
        let mut rng = stream_rng(4, 1);
        let n = 1_000_000;
        let mut acc = DMatrix::<f64>::zeros(4, 4);
        let mut row = DVector::<f64>::zeros(4);
        for _ in 0..n {
            let z = DVector::from_fn(2, |i, _| sd_z[i] * rng.sample::<f64, _>(StandardNormal));
            let (u1, u2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let x = s.beta.dot(&z) + ex * u1;
            let y = gamma.dot(&z) + s.theta * x + ey * (rho * u1 + (1.0 - rho * rho).sqrt() * u2);
            row[0] = z[0];
            row[1] = z[1];
            row[2] = x;
            row[3] = y;
            acc += &row * row.transpose();
        }
        acc /= n as f64;
        let tol = 0.02 * m.amax().max(1.0);
        assert!((acc - &m).amax() < tol);
    }

    #[test]
    fn log_likelihood_matches_density_sum() {
        for seed in 0..20 {
            let d = 1 + (seed as usize % 3);
            let n = 5 + seed as usize * 2;
            let state = random_state(d, seed);
            let sigma = model_covariance(&state, 1.0, GammaEncoding::AsPrinted);
            let (data, _) = generate_dataset(&SimConfig { d_z: d, seed, gamma_sparsity: 0.0, ..SimConfig::default() }, n).unwrap();
            let s = suffstat(&data);
            // Independent oracle: LU inverse and determinant, per-row quadratic forms.
            let inv = sigma.clone().lu().try_inverse().unwrap();
            let log_det = sigma.clone().lu().determinant().ln();
            let m = data.matrix();
            let means: Vec<f64> = m.column_iter().map(|c| c.mean()).collect();
            let k = d + 2;
            let mut total = 0.0;
            for i in 0..n {
                let x = DVector::from_fn(k, |j, _| m[(i, j)] - means[j]);
                total += -0.5 * (x.transpose() * &inv * &x)[(0, 0)] - 0.5 * log_det - 0.5 * k as f64 * (2.0 * std::f64::consts::PI).ln();
            }
            let ll = log_likelihood(&sigma, &s, n) - 0.5 * (n * k) as f64 * (2.0 * std::f64::consts::PI).ln();
            assert!((ll - total).abs() < 1e-8 * total.abs().max(1.0), "{ll} vs {total}");
        }
    }

    #[test]
    fn zero_record_and_scaling() {
        let state = random_state(2, 5);
        let sigma = model_covariance(&state, 1.0, GammaEncoding::AsPrinted);
        let zero = DMatrix::zeros(4, 4);
        let log_det = sigma.clone().lu().determinant().ln();
        assert!((log_likelihood(&sigma, &zero, 1) + 0.5 * log_det).abs() < 1e-12);
        let s = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 + i as f64 } else { 0.1 });
        let l1 = log_likelihood(&sigma, &s, 3) + 1.5 * log_det;
        let l2 = log_likelihood(&sigma, &(&s * 2.0), 3) + 1.5 * log_det;
        assert!((l2 - 2.0 * l1).abs() < 1e-10);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(log_likelihood(&bad, &DMatrix::identity(2, 2), 1), f64::NEG_INFINITY);
    }

    #[test]
    fn reproducible_chain_respects_encodings() {
        let (data, _) = generate_dataset(&SimConfig { seed: 3, ..SimConfig::default() }, 300).unwrap();
        let config = BayesConfig {
            tau: 2.0,
            chain: ChainSettings { n_iter: 600, burn_in: 200, adapt_iters: 400, thin: 2 },
            seed: 9,
            ..BayesConfig::default()
        };
        let a = run_mh(&data, &config).unwrap();
        let b = run_mh(&data, &config).unwrap();
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.theta.len(), 300);
        assert!(a.kappa.iter().all(|k| (0.0..=1.0).contains(k)));
        assert!(a.rho.iter().all(|r| (-1.0..=1.0).contains(r)));
        let (lo, hi) = a.credible_bounds(0.1);
        assert!(lo <= hi);
    }

    #[test]
    fn prior_only_chain_recovers_theta_prior() {
        let (data, _) = generate_dataset(&SimConfig { seed: 3, ..SimConfig::default() }, 50).unwrap();
        let config = BayesConfig {
            prior_only: true,
            chain: ChainSettings { n_iter: 40_000, burn_in: 1000, adapt_iters: 2000, thin: 20 },
            seed: 1,
            ..BayesConfig::default()
        };
        let post = run_mh(&data, &config).unwrap();
        let ks = ks_statistic_normal(&post.theta, 0.0, 10.0);
        let critical = 1.628 / (post.theta.len() as f64).sqrt();
        assert!(ks < critical, "KS {ks} vs {critical}");
    }
}
