use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ate_from_rho;
use crate::covariance::{compute_kappas, compute_regression_vectors, CovarianceBlocks};
use crate::error::Result;

/// Structural parameters of the linear model consistent with a covariance at a given ρ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentParams {
    pub theta: f64,
    pub gamma: DVector<f64>,
    pub rho: f64,
    pub eta_x: f64,
    pub eta_y: f64,
}

impl LatentParams {
    /// Solves for (θ, γ, η_x, η_y) given ρ.
    pub fn from_rho(blocks: &CovarianceBlocks, rho: f64) -> Result<Self> {
        let kappas = compute_kappas(blocks)?;
        let vectors = compute_regression_vectors(blocks)?;
        let theta = ate_from_rho(rho, &kappas)?;
        let gamma = &vectors.alpha - &vectors.beta * theta;
        // Var(Y − θX | Z) = η_y².
        let eta_y_sq = kappas.kappa_yy - 2.0 * theta * kappas.kappa_xy + theta * theta * kappas.kappa_xx;
        Ok(Self { theta, gamma, rho, eta_x: kappas.kappa_xx.sqrt(), eta_y: eta_y_sq.max(0.0).sqrt() })
    }

    /// Covariance implied by the structural equations with first-stage weights `beta`.
    pub fn implied_covariance(&self, sigma_zz: &DMatrix<f64>, beta: &DVector<f64>) -> DMatrix<f64> {
        structural_covariance(sigma_zz, beta, &self.gamma, self.theta, self.rho, self.eta_x, self.eta_y)
    }
}

/// Covariance of `[Z.., X, Y]` under X = β·Z + ε_x, Y = γ·Z + θX + ε_y with
/// Corr(ε_x, ε_y) = ρ and standard deviations η_x, η_y.
pub fn structural_covariance(
    sigma_zz: &DMatrix<f64>,
    beta: &DVector<f64>,
    gamma: &DVector<f64>,
    theta: f64,
    rho: f64,
    eta_x: f64,
    eta_y: f64,
) -> DMatrix<f64> {
    let d = beta.len();
    let s_zx = sigma_zz * beta;
    let s_zg = sigma_zz * gamma;
    let s_zy = &s_zg + &s_zx * theta;
    let cross = rho * eta_x * eta_y;
    let s_xx = beta.dot(&s_zx) + eta_x * eta_x;
    let s_xy = theta * s_xx + gamma.dot(&s_zx) + cross;
    let s_yy = gamma.dot(&s_zg) + 2.0 * theta * gamma.dot(&s_zx) + theta * theta * s_xx + 2.0 * theta * cross + eta_y * eta_y;

    let mut m = DMatrix::zeros(d + 2, d + 2);
    m.view_mut((0, 0), (d, d)).copy_from(sigma_zz);
    for j in 0..d {
        m[(j, d)] = s_zx[j];
        m[(d, j)] = s_zx[j];
        m[(j, d + 1)] = s_zy[j];
        m[(d + 1, j)] = s_zy[j];
    }
    m[(d, d)] = s_xx;
    m[(d, d + 1)] = s_xy;
    m[(d + 1, d)] = s_xy;
    m[(d + 1, d + 1)] = s_yy;
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_blocks(seed: u64, d: usize) -> CovarianceBlocks {
        let mut rng = stream_rng(seed, 0);
        let a = DMatrix::from_fn(d + 2, d + 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        CovarianceBlocks::from_matrix(&(&a * a.transpose() + DMatrix::identity(d + 2, d + 2) * 0.2)).unwrap()
    }

    #[test]
    fn structural_covariance_matches_linear_map() {
        // (Z, X, Y) = M (Z, ε_x, ε_y) with Cov(Z, ε) = 0.
        let d = 3;
        let blocks = random_blocks(3, d);
        let beta = DVector::from_vec(vec![0.4, -1.0, 0.7]);
        let gamma = DVector::from_vec(vec![0.2, 0.0, -0.5]);
        let (theta, rho, ex, ey) = (1.3, -0.35, 0.8, 1.7);
        let mut m = DMatrix::zeros(d + 2, d + 2);
        for j in 0..d {
            m[(j, j)] = 1.0;
            m[(d, j)] = beta[j];
            m[(d + 1, j)] = gamma[j] + theta * beta[j];
        }
        m[(d, d)] = 1.0;
        m[(d + 1, d)] = theta;
        m[(d + 1, d + 1)] = 1.0;
        let mut base = DMatrix::zeros(d + 2, d + 2);
        base.view_mut((0, 0), (d, d)).copy_from(&blocks.sigma_zz);
        base[(d, d)] = ex * ex;
        base[(d + 1, d + 1)] = ey * ey;
        base[(d, d + 1)] = rho * ex * ey;
        base[(d + 1, d)] = rho * ex * ey;
        let oracle = &m * base * m.transpose();
        let got = structural_covariance(&blocks.sigma_zz, &beta, &gamma, theta, rho, ex, ey);
        assert!((got - oracle).abs().max() < 1e-12);
    }

    #[test]
    fn latent_parameters_reproduce_the_covariance() {
        for seed in 0..20 {
            let d = 1 + (seed as usize % 5);
            let blocks = random_blocks(100 + seed, d);
            let beta = compute_regression_vectors(&blocks).unwrap().beta;
            let full = blocks.to_matrix();
            for rho in [-0.95, -0.5, 0.0, 0.3, 0.9] {
                let latent = LatentParams::from_rho(&blocks, rho).unwrap();
                let implied = latent.implied_covariance(&blocks.sigma_zz, &beta);
                let err = (&implied - &full).abs().max() / full.abs().max();
                assert!(err < 1e-8, "seed {seed}, rho {rho}: {err:e}");
            }
        }
    }
}
