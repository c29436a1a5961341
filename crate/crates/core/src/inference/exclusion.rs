use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{tetrad_from_columns, tetrad_statistic, two_stage_least_squares};
use crate::covariance::{sample_covariance, CovarianceBlocks, CovarianceOptions, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{clip_to_psd, psd_sqrt};
use crate::rng::{stream_rng, StreamRng};

/// Largest relative Frobenius change accepted when repairing Σ⁰ to PSD.
pub const REPAIR_TOL: f64 = 1e-6;

pub const MIN_REPLICATES: usize = 99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionTestResult {
    pub psi_hat: f64,
    pub p_value: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub theta_2sls: f64,
    /// Relative change made by the PSD repair of the null covariance (0 if none).
    #[serde(default)]
    pub null_repair: f64,
    #[serde(skip)]
    pub null_stats: Vec<f64>,
}

/// Source of synthetic rows under the null; must produce mean-zero draws with
/// covariance `factor·factorᵀ`.
pub trait NullSampler: Sync {
    fn draw(&self, factor: &DMatrix<f64>, rng: &mut StreamRng, scratch: &mut [f64], row: &mut [f64]);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianSampler;

impl NullSampler for GaussianSampler {
    fn draw(&self, factor: &DMatrix<f64>, rng: &mut StreamRng, scratch: &mut [f64], row: &mut [f64]) {
        scratch.iter_mut().for_each(|u| *u = rng.sample(StandardNormal));
        lower_mul(factor, scratch, row);
    }
}

/// Multivariate t with `dof` > 2 degrees of freedom, rescaled to the target covariance.
#[derive(Debug, Clone, Copy)]
pub struct StudentTSampler {
    chi: ChiSquared<f64>,
    dof: f64,
}

impl StudentTSampler {
    pub fn new(dof: f64) -> Result<Self> {
        if !(dof > 2.0 && dof.is_finite()) {
            return Err(Error::invalid(format!("t sampler needs finite dof > 2, got {dof}")));
        }
        let chi = ChiSquared::new(dof).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Self { chi, dof })
    }
}

impl NullSampler for StudentTSampler {
    fn draw(&self, factor: &DMatrix<f64>, rng: &mut StreamRng, scratch: &mut [f64], row: &mut [f64]) {
        GaussianSampler.draw(factor, rng, scratch, row);
        let w: f64 = rng.sample(self.chi);
        let scale = ((self.dof - 2.0) / w).sqrt();
        row.iter_mut().for_each(|v| *v *= scale);
    }
}

fn lower_mul(factor: &DMatrix<f64>, u: &[f64], out: &mut [f64]) {
    let k = u.len();
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (j, uj) in u.iter().enumerate().take(k) {
            s += factor[(i, j)] * uj;
        }
        *o = s;
    }
}

/// Null covariance: Σ̂ with Σ_zy replaced by Σ_zx·θ̂, repaired to PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct NullCovariance {
    pub sigma: DMatrix<f64>,
    pub theta_2sls: f64,
    pub repair_change: f64,
}

pub fn null_covariance(blocks: &CovarianceBlocks) -> Result<NullCovariance> {
    let theta = two_stage_least_squares(blocks)?;
    let d = blocks.d_z();
    let mut full = blocks.to_matrix();
    for j in 0..d {
        let v = blocks.sigma_zx[j] * theta;
        full[(j, d + 1)] = v;
        full[(d + 1, j)] = v;
    }
    let (sigma, change) = clip_to_psd(&full);
    if change > REPAIR_TOL {
        return Err(Error::NullNotRepairable { relative_change: change, limit: REPAIR_TOL });
    }
    Ok(NullCovariance { sigma, theta_2sls: theta, repair_change: change })
}

/// Monte Carlo exclusion test with Gaussian null draws.
pub fn exclusion_test(data: &Dataset, b: usize, seed: u64) -> Result<ExclusionTestResult> {
    exclusion_test_with(data, b, seed, &GaussianSampler)
}

/// Monte Carlo exclusion test: p = (#{ψ⁰ ≥ ψ̂} + 1)/(B + 1).
pub fn exclusion_test_with(data: &Dataset, b: usize, seed: u64, sampler: &dyn NullSampler) -> Result<ExclusionTestResult> {
    if data.d_z() < 2 {
        return Err(Error::TooFewInstruments { d_z: data.d_z() });
    }
    if b < MIN_REPLICATES {
        return Err(Error::invalid(format!("exclusion test needs B >= {MIN_REPLICATES}, got {b}")));
    }
    let blocks = sample_covariance(data, &CovarianceOptions::default())?;
    let psi_hat = tetrad_statistic(&blocks)?;
    let null = null_covariance(&blocks)?;
    let factor = psd_sqrt(&null.sigma);
    let n = data.n();
    let d = data.d_z();

    let null_stats: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, rep as u64);
            replicate_statistic(&factor, d, n, sampler, &mut rng)
        })
        .collect();
    let p_value = monte_carlo_p_value(&null_stats, psi_hat);
    Ok(ExclusionTestResult { psi_hat, p_value, b, theta_2sls: null.theta_2sls, null_repair: null.repair_change, null_stats })
}

/// ψ of one synthetic dataset; only the Z–X and Z–Y covariances are accumulated.
fn replicate_statistic(factor: &DMatrix<f64>, d: usize, n: usize, sampler: &dyn NullSampler, rng: &mut StreamRng) -> f64 {
    let k = d + 2;
    let mut scratch = vec![0.0; k];
    let mut row = vec![0.0; k];
    let mut sums = vec![0.0; k];
    let mut zx = vec![0.0; d];
    let mut zy = vec![0.0; d];
    for _ in 0..n {
        sampler.draw(factor, rng, &mut scratch, &mut row);
        let (x, y) = (row[d], row[d + 1]);
        for j in 0..d {
            zx[j] += row[j] * x;
            zy[j] += row[j] * y;
        }
        for (s, v) in sums.iter_mut().zip(&row) {
            *s += v;
        }
    }
    let nf = n as f64;
    let (mx, my) = (sums[d] / nf, sums[d + 1] / nf);
    for j in 0..d {
        let mz = sums[j] / nf;
        zx[j] = zx[j] / nf - mz * mx;
        zy[j] = zy[j] / nf - mz * my;
    }
    tetrad_from_columns(&zx, &zy)
}

/// p-value from a vector of null statistics.
fn monte_carlo_p_value(null_stats: &[f64], observed: f64) -> f64 {
    let exceed = null_stats.iter().filter(|&&s| s >= observed).count();
    (exceed + 1) as f64 / (null_stats.len() + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{generate_dataset, SimConfig};

    #[test]
    fn counting_formula() {
        let stats = vec![0.5; 99];
        assert_eq!(monte_carlo_p_value(&stats, 1.0), 0.01);
        assert_eq!(monte_carlo_p_value(&stats, 0.5), 1.0);
    }

    #[test]
    fn null_covariance_satisfies_tetrad_constraint() {
        let (data, _) = generate_dataset(&SimConfig { seed: 2, ..SimConfig::default() }, 500).unwrap();
        let blocks = sample_covariance(&data, &CovarianceOptions::default()).unwrap();
        let null = null_covariance(&blocks).unwrap();
        let nb = CovarianceBlocks::partition(&null.sigma).unwrap();
        assert!(tetrad_statistic(&nb).unwrap() < 1e-12 * tetrad_statistic(&blocks).unwrap().max(1.0));
    }

    #[test]
    fn rejects_small_b_and_single_instrument() {
        let (data, _) = generate_dataset(&SimConfig { seed: 1, ..SimConfig::default() }, 200).unwrap();
        assert!(matches!(exclusion_test(&data, 50, 0), Err(Error::InvalidInput(_))));
        let (one, _) = generate_dataset(&SimConfig { d_z: 1, seed: 1, ..SimConfig::default() }, 200).unwrap();
        assert!(matches!(exclusion_test(&one, 199, 0), Err(Error::TooFewInstruments { .. })));
    }

    #[test]
    fn deterministic_and_detects_strong_leakage() {
        let cfg = SimConfig { tau_check_target: Some(2.0), seed: 9, ..SimConfig::default() };
        let (data, _) = generate_dataset(&cfg, 2000).unwrap();
        let a = exclusion_test(&data, 199, 4).unwrap();
        let b = exclusion_test(&data, 199, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.p_value <= 0.01, "p = {}", a.p_value);
    }

    #[test]
    fn t_sampler_matches_target_covariance() {
        let sampler = StudentTSampler::new(6.0).unwrap();
        let factor = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 2.0]);
        let mut rng = stream_rng(1, 0);
        let (mut s, mut r) = (vec![0.0; 2], vec![0.0; 2]);
        let mut acc = [0.0; 3];
        let n = 200_000;
        for _ in 0..n {
            sampler.draw(&factor, &mut rng, &mut s, &mut r);
            acc[0] += r[0] * r[0];
            acc[1] += r[0] * r[1];
            acc[2] += r[1] * r[1];
        }
        let target = [1.0, 0.5, 4.25];
        for (a, t) in acc.iter().zip(target) {
            assert!((a / n as f64 - t).abs() < 0.05 * t, "{} vs {t}", a / n as f64);
        }
    }
}
