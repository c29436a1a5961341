//! SNR-calibrated data from the linear leaky-IV model
//!
//! ```text
//! X = β·Z + ε_x,   Y = γ·Z + θX + ε_y,   Corr(ε_x, ε_y) = ρ.
//! ```
//!
//! The first-stage direction is drawn at random and normalised so that
//! β·Σ_zz·β = 1; η_x, η_y and the leakage scale ζ are then solved so that the
//! requested signal-to-noise ratios hold exactly in the population.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bounds::{min_leakage, structural_covariance, NormOrder};
use crate::covariance::{compute_regression_vectors, CovarianceBlocks, Dataset};
use crate::error::{Error, Result};
use crate::linalg::cholesky_factor;
use crate::rng::{stream_rng, StreamRng};

/// Structure of the instrument covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SigmaZzKind {
    Diagonal,
    Toeplitz { autocorr: f64 },
}

impl SigmaZzKind {
    pub const TOEPLITZ: SigmaZzKind = SigmaZzKind::Toeplitz { autocorr: 0.5 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub d_z: usize,
    pub sigma_zz_kind: SigmaZzKind,
    pub rho: f64,
    pub snr_x: f64,
    pub snr_y: f64,
    pub theta_star: f64,
    pub sigma_yy: f64,
    /// Fraction of leakage weights forced to zero.
    pub gamma_sparsity: f64,
    /// When set, γ is drawn orthogonal to β with ‖γ‖₂ equal to this value,
    /// so the population minimum leakage τ̌₂ hits it exactly. Σ_yy is then
    /// implied by SNR_Y instead of being fixed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_check_target: Option<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            d_z: 5,
            sigma_zz_kind: SigmaZzKind::Diagonal,
            rho: 0.0,
            snr_x: 2.0,
            snr_y: 2.0,
            theta_star: 1.0,
            sigma_yy: 10.0,
            gamma_sparsity: 0.2,
            tau_check_target: None,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_z == 0 {
            return Err(Error::invalid("d_z must be positive"));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::invalid(format!("rho must lie in (-1, 1), got {}", self.rho)));
        }
        if !(self.snr_x > 0.0 && self.snr_x.is_finite() && self.snr_y > 0.0 && self.snr_y.is_finite()) {
            return Err(Error::invalid("SNRs must be positive and finite"));
        }
        if !(self.sigma_yy > 0.0 && self.sigma_yy.is_finite()) {
            return Err(Error::invalid("sigma_yy must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma_sparsity) {
            return Err(Error::invalid("gamma_sparsity must lie in [0, 1)"));
        }
        if !self.theta_star.is_finite() {
            return Err(Error::invalid("theta_star must be finite"));
        }
        if let SigmaZzKind::Toeplitz { autocorr } = self.sigma_zz_kind {
            if !(autocorr.abs() < 1.0) {
                return Err(Error::invalid("Toeplitz autocorrelation must lie in (-1, 1)"));
            }
        }
        if let Some(t) = self.tau_check_target {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::invalid("tau_check_target must be nonnegative"));
            }
            if t > 0.0 && self.d_z < 2 {
                return Err(Error::invalid("a positive tau_check_target needs d_z >= 2"));
            }
        }
        Ok(())
    }

    pub fn marginal_z_var(&self) -> f64 {
        1.0 / self.d_z as f64
    }

    pub fn sigma_zz(&self) -> DMatrix<f64> {
        let autocorr = match self.sigma_zz_kind {
            SigmaZzKind::Diagonal => 0.0,
            SigmaZzKind::Toeplitz { autocorr } => autocorr,
        };
        toeplitz_covariance(self.d_z, autocorr, self.marginal_z_var())
    }
}

/// Entry (i, j) = marginal_var · autocorr^|i−j|.
pub fn toeplitz_covariance(d_z: usize, autocorr: f64, marginal_var: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d_z, d_z, |i, j| marginal_var * autocorr.powi(i.abs_diff(j) as i32))
}

/// Scale parameters implied by the SNR targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrParams {
    pub eta_x: f64,
    pub sigma_xx: f64,
    pub eta_y: f64,
    pub zeta: f64,
}

/// Solves the variance equations and SNR definitions for (η_x, Σ_xx, η_y, ζ).
///
/// η_y is the positive root of η² + 2θρη_xη − Σ_yy/(1+SNR_Y) = 0 and ζ the
/// larger root of A_yy ζ² + 2θA_xy ζ + θ²Σ_xx − Σ_yy·SNR_Y/(1+SNR_Y) = 0.
pub fn solve_snr_params(
    config: &SimConfig,
    sigma_zz: &DMatrix<f64>,
    beta_tilde: &DVector<f64>,
    gamma_tilde: &DVector<f64>,
) -> Result<SnrParams> {
    let a = quadratic_forms(sigma_zz, beta_tilde, gamma_tilde);
    if !(a.xx > 0.0) {
        return Err(Error::DegenerateDirection("beta_tilde has zero signal (A_xx = 0)".into()));
    }
    if !(a.yy > 0.0) {
        return Err(Error::DegenerateDirection("gamma_tilde has zero signal (A_yy = 0)".into()));
    }
    let theta = config.theta_star;
    let eta_x = (a.xx / config.snr_x).sqrt();
    let sigma_xx = a.xx + eta_x * eta_x;

    let noise = config.sigma_yy / (1.0 + config.snr_y);
    let eta_y = positive_root_monic(2.0 * theta * config.rho * eta_x, -noise)
        .ok_or_else(|| Error::UnachievableSnr("no positive residual scale for Y".into()))?;

    let signal = config.sigma_yy - noise;
    let half_b = theta * a.xy;
    let c = theta * theta * sigma_xx - signal;
    let radicand = half_b * half_b - a.yy * c;
    if radicand < 0.0 {
        return Err(Error::UnachievableSnr(format!(
            "leakage scale has no real solution (radicand {radicand:.3e})"
        )));
    }
    let zeta = larger_root(a.yy, half_b, c, radicand);
    if !(zeta > 0.0) {
        return Err(Error::UnachievableSnr(format!(
            "Y signal {signal:.4} is already exceeded by the treatment path θ²Σ_xx = {:.4}",
            theta * theta * sigma_xx
        )));
    }
    Ok(SnrParams { eta_x, sigma_xx, eta_y, zeta })
}

/// η_y and ζ evaluated from the closed forms as printed in the model write-up.
///
/// They agree with [`solve_snr_params`] only when θρη_x = 1 (for η_y) and
/// A_xy = A_yy (for ζ); elsewhere they do not satisfy the defining
/// equations. Kept as a cross-check.
pub fn printed_closed_forms(
    config: &SimConfig,
    sigma_zz: &DMatrix<f64>,
    beta_tilde: &DVector<f64>,
    gamma_tilde: &DVector<f64>,
    eta_x: f64,
    sigma_xx: f64,
) -> (f64, f64) {
    let a = quadratic_forms(sigma_zz, beta_tilde, gamma_tilde);
    let theta = config.theta_star;
    let eta_y = theta * config.rho * eta_x * (-1.0 + (1.0 + config.sigma_yy / (1.0 + config.snr_y)).sqrt());
    let signal = config.sigma_yy / (1.0 + 1.0 / config.snr_y) - theta * theta * sigma_xx;
    let zeta = theta * a.yy / a.xy * (-1.0 + (1.0 + a.xy / (a.yy * a.yy * theta * theta) * signal).sqrt());
    (eta_y, zeta)
}

struct QuadForms {
    xx: f64,
    xy: f64,
    yy: f64,
}

fn quadratic_forms(sigma_zz: &DMatrix<f64>, b: &DVector<f64>, g: &DVector<f64>) -> QuadForms {
    let sb = sigma_zz * b;
    let sg = sigma_zz * g;
    QuadForms { xx: b.dot(&sb), xy: b.dot(&sg), yy: g.dot(&sg) }
}

/// Positive root of η² + bη + c = 0 with c < 0, in cancellation-free form.
fn positive_root_monic(b: f64, c: f64) -> Option<f64> {
    if c >= 0.0 {
        return None;
    }
    let half = 0.5 * b;
    let s = (half * half - c).sqrt();
    Some(if half > 0.0 { -c / (half + s) } else { s - half })
}

/// Larger root of a·x² + 2·half_b·x + c = 0 (a > 0).
fn larger_root(a: f64, half_b: f64, c: f64, radicand: f64) -> f64 {
    let s = radicand.sqrt();
    if half_b > 0.0 {
        -c / (half_b + s)
    } else {
        (s - half_b) / a
    }
}

/// Population quantities behind a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
    pub theta_star: f64,
    pub rho: f64,
    pub eta_x: f64,
    pub eta_y: f64,
    pub zeta: f64,
    pub tau_star_2: f64,
    pub tau_check_2: f64,
    /// Full population covariance in `[Z.., X, Y]` order.
    pub sigma: DMatrix<f64>,
}

impl GroundTruth {
    pub fn blocks(&self) -> Result<CovarianceBlocks> {
        CovarianceBlocks::partition(&self.sigma)
    }

    /// Oracle leakage ‖γ*‖_p.
    pub fn tau_star(&self, p: NormOrder) -> f64 {
        crate::bounds::leakage_norm(self.theta_star, &crate::covariance::RegressionVectors {
            alpha: &self.gamma + &self.beta * self.theta_star,
            beta: self.beta.clone(),
        }, p)
    }

    /// Population minimum leakage τ̌_p.
    pub fn tau_check(&self, p: NormOrder) -> Result<f64> {
        Ok(min_leakage(&compute_regression_vectors(&self.blocks()?)?, p)?.tau_check)
    }

    /// `{beta, gamma, theta_star, rho, eta_x, eta_y, tau_star_2, tau_check_2}`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "beta": self.beta.as_slice(),
            "gamma": self.gamma.as_slice(),
            "theta_star": self.theta_star,
            "rho": self.rho,
            "eta_x": self.eta_x,
            "eta_y": self.eta_y,
            "tau_star_2": self.tau_star_2,
            "tau_check_2": self.tau_check_2,
        })
    }
}

/// Draws structural parameters for `config` (stream 0 of its seed).
pub fn draw_ground_truth(config: &SimConfig) -> Result<GroundTruth> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, 0);
    ground_truth_with(config, &mut rng)
}

fn ground_truth_with(config: &SimConfig, rng: &mut StreamRng) -> Result<GroundTruth> {
    let d = config.d_z;
    let sigma_zz = config.sigma_zz();
    let beta_raw = standard_normal_vector(rng, d);
    let a_xx = beta_raw.dot(&(&sigma_zz * &beta_raw));
    if !(a_xx > 0.0) {
        return Err(Error::DegenerateDirection("drawn beta has zero signal".into()));
    }
    let beta = beta_raw / a_xx.sqrt();
    let theta = config.theta_star;

    let (gamma, eta_x, eta_y, zeta) = match config.tau_check_target {
        None => {
            let mut gamma_tilde = standard_normal_vector(rng, d);
            let zeroed = (config.gamma_sparsity * d as f64).floor() as usize;
            for j in index::sample(rng, d, zeroed) {
                gamma_tilde[j] = 0.0;
            }
            let snr = solve_snr_params(config, &sigma_zz, &beta, &gamma_tilde)?;
            (gamma_tilde * snr.zeta, snr.eta_x, snr.eta_y, snr.zeta)
        }
        Some(target) => {
            let eta_x = (1.0 / config.snr_x).sqrt();
            let sigma_xx = 1.0 + eta_x * eta_x;
            let gamma = if target > 0.0 {
                orthogonal_direction(rng, &beta)? * target
            } else {
                DVector::zeros(d)
            };
            let sg = &sigma_zz * &gamma;
            let signal = gamma.dot(&sg) + theta * theta * sigma_xx + 2.0 * theta * sg.dot(&beta);
            let noise = signal / config.snr_y;
            let eta_y = positive_root_monic(2.0 * theta * config.rho * eta_x, -noise)
                .ok_or_else(|| Error::UnachievableSnr("Y has no signal to calibrate against".into()))?;
            (gamma, eta_x, eta_y, target)
        }
    };

    let sigma = structural_covariance(&sigma_zz, &beta, &gamma, theta, config.rho, eta_x, eta_y);
    let tau_star_2 = gamma.norm();
    let blocks = CovarianceBlocks::partition(&sigma)?;
    let tau_check_2 = min_leakage(&compute_regression_vectors(&blocks)?, NormOrder::Finite(2.0))?.tau_check;
    Ok(GroundTruth { beta, gamma, theta_star: theta, rho: config.rho, eta_x, eta_y, zeta, tau_star_2, tau_check_2, sigma })
}

/// Unit vector orthogonal to `beta` (Euclidean), uniformly oriented.
fn orthogonal_direction(rng: &mut StreamRng, beta: &DVector<f64>) -> Result<DVector<f64>> {
    let unit = beta.normalize();
    for _ in 0..16 {
        let v = standard_normal_vector(rng, beta.len());
        let w = &v - &unit * unit.dot(&v);
        let norm = w.norm();
        if norm > 1e-8 * v.norm() {
            return Ok(w / norm);
        }
    }
    Err(Error::DegenerateDirection("could not draw a direction orthogonal to beta".into()))
}

fn standard_normal_vector(rng: &mut StreamRng, d: usize) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Samples `n` rows from the structural equations of `truth`.
pub fn sample_dataset(truth: &GroundTruth, n: usize, rng: &mut StreamRng) -> Result<Dataset> {
    let d = truth.beta.len();
    let sigma_zz = truth.sigma.view((0, 0), (d, d)).into_owned();
    let chol = cholesky_factor(&sigma_zz)?;
    let rho_c = (1.0 - truth.rho * truth.rho).sqrt();
    let mut values = DMatrix::zeros(n, d + 2);
    let mut raw = DVector::zeros(d);
    for i in 0..n {
        raw.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let z = &chol * &raw;
        let u1: f64 = rng.sample(StandardNormal);
        let u2: f64 = rng.sample(StandardNormal);
        let eps_x = truth.eta_x * u1;
        let eps_y = truth.eta_y * (truth.rho * u1 + rho_c * u2);
        let x = truth.beta.dot(&z) + eps_x;
        let y = truth.gamma.dot(&z) + truth.theta_star * x + eps_y;
        for j in 0..d {
            values[(i, j)] = z[j];
        }
        values[(i, d)] = x;
        values[(i, d + 1)] = y;
    }
    Dataset::from_layout(values)
}

/// Draws ground truth (stream 0) and `n` observations (stream 1) for `config`.
pub fn generate_dataset(config: &SimConfig, n: usize) -> Result<(Dataset, GroundTruth)> {
    let truth = draw_ground_truth(config)?;
    let mut rng = stream_rng(config.seed, 1);
    Ok((sample_dataset(&truth, n, &mut rng)?, truth))
}

/// SNR_X and SNR_Y implied by a covariance and known structural weights.
pub fn empirical_snr(sigma: &DMatrix<f64>, beta: &DVector<f64>, gamma: &DVector<f64>, theta: f64) -> (f64, f64) {
    let d = beta.len();
    let sigma_zz = sigma.view((0, 0), (d, d)).into_owned();
    let sb = &sigma_zz * beta;
    let signal_x = beta.dot(&sb);
    let sigma_xx = sigma[(d, d)];
    let noise_x = sigma_xx - signal_x;
    let sg = &sigma_zz * gamma;
    let signal_y = gamma.dot(&sg) + theta * theta * sigma_xx + 2.0 * theta * sg.dot(beta);
    let noise_y = sigma[(d + 1, d + 1)] - signal_y;
    (signal_x / noise_x, signal_y / noise_y)
}
