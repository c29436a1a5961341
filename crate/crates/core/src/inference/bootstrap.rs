use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::bounds::{ate_bounds_scalar, ate_bounds_vector, AteBounds, TauSpec};
use crate::covariance::{sample_covariance, weighted_sample_covariance, CovarianceOptions, Dataset};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub const MIN_BOOTSTRAP_REPLICATES: usize = 199;
const KERNEL_GRID: usize = 4096;
const KERNEL_SPAN: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSide {
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapMethod {
    #[default]
    Empirical,
    Kernel,
    Gaussian,
}

impl fmt::Display for BootstrapMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BootstrapMethod::Empirical => "empirical",
            BootstrapMethod::Kernel => "kernel",
            BootstrapMethod::Gaussian => "gaussian",
        })
    }
}

impl FromStr for BootstrapMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "empirical" => Ok(BootstrapMethod::Empirical),
            "kernel" | "kde" => Ok(BootstrapMethod::Kernel),
            "gaussian" | "normal" => Ok(BootstrapMethod::Gaussian),
            _ => Err(Error::invalid(format!("unknown bootstrap method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub target: BoundSide,
    pub alpha: f64,
    pub method: BootstrapMethod,
    pub ci: [f64; 2],
    pub n_discarded: usize,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// Intervals for both endpoints plus the full-sample bounds they surround.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapBounds {
    pub estimate: AteBounds,
    pub theta_minus: BootstrapResult,
    pub theta_plus: BootstrapResult,
}

impl BootstrapBounds {
    /// Re-derives both intervals from the stored replicates with another method.
    pub fn with_method(&self, method: BootstrapMethod) -> Result<Self> {
        let redo = |r: &BootstrapResult| -> Result<BootstrapResult> {
            Ok(BootstrapResult { method, ci: interval(&r.samples, r.alpha, method)?, ..r.clone() })
        };
        Ok(Self { estimate: self.estimate.clone(), theta_minus: redo(&self.theta_minus)?, theta_plus: redo(&self.theta_plus)? })
    }
}

fn bounds_for(blocks: &crate::covariance::CovarianceBlocks, spec: &TauSpec) -> Result<AteBounds> {
    match spec {
        TauSpec::Scalar { p, tau } => ate_bounds_scalar(blocks, *p, *tau),
        TauSpec::Vector { tau } => ate_bounds_vector(blocks, tau),
    }
}

/// Row-resampling bootstrap of θ⁻ and θ⁺.
///
/// Replicates whose covariance or bounds fail (infeasible budget, singular
/// resample) are discarded; quantiles are taken over the retained ones.
pub fn bootstrap_bounds(
    data: &Dataset,
    spec: &TauSpec,
    b: usize,
    alpha: f64,
    method: BootstrapMethod,
    seed: u64,
) -> Result<BootstrapBounds> {
    if b < MIN_BOOTSTRAP_REPLICATES {
        return Err(Error::invalid(format!("bootstrap needs B >= {MIN_BOOTSTRAP_REPLICATES}, got {b}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    spec.validate(data.d_z())?;
    let opts = CovarianceOptions::default();
    let estimate = bounds_for(&sample_covariance(data, &opts)?, spec)?;
    let n = data.n();

    let replicates: Vec<Option<(f64, f64)>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, rep as u64);
            let mut counts = vec![0.0; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1.0;
            }
            let blocks = weighted_sample_covariance(data, &counts, &opts).ok()?;
            let bounds = bounds_for(&blocks, spec).ok()?;
            Some((bounds.theta_minus, bounds.theta_plus))
        })
        .collect();

    let (lower, upper): (Vec<f64>, Vec<f64>) = replicates.iter().flatten().copied().unzip();
    let n_discarded = b - lower.len();
    if 2 * n_discarded > b {
        return Err(Error::TooManyDiscarded { discarded: n_discarded, total: b });
    }
    let result = |target, samples: Vec<f64>| -> Result<BootstrapResult> {
        Ok(BootstrapResult { target, alpha, method, ci: interval(&samples, alpha, method)?, n_discarded, b, samples })
    };
    Ok(BootstrapBounds { estimate, theta_minus: result(BoundSide::Minus, lower)?, theta_plus: result(BoundSide::Plus, upper)? })
}

/// 1-based order-statistic indices l = ⌈(R+1)α/2⌉ and u = ⌈(R+1)(1−α/2)⌉,
/// clamped to [1, R].
pub fn quantile_indices(retained: usize, alpha: f64) -> (usize, usize) {
    let r = retained as f64 + 1.0;
    // Guard the ceiling against representation error, e.g. 2000·0.05 = 100.00000000000001.
    let ceil = |x: f64| (x - 1e-9 * x.abs().max(1.0)).ceil() as usize;
    let l = ceil(r * alpha / 2.0).clamp(1, retained);
    let u = ceil(r * (1.0 - alpha / 2.0)).clamp(1, retained);
    (l, u)
}

fn interval(samples: &[f64], alpha: f64, method: BootstrapMethod) -> Result<[f64; 2]> {
    if samples.is_empty() {
        return Err(Error::TooManyDiscarded { discarded: 0, total: 0 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    match method {
        BootstrapMethod::Empirical => {
            let (l, u) = quantile_indices(sorted.len(), alpha);
            Ok([sorted[l - 1], sorted[u - 1]])
        }
        BootstrapMethod::Gaussian => {
            let (mean, sd) = mean_sd(&sorted);
            if sd == 0.0 {
                return Ok([mean, mean]);
            }
            let normal = Normal::new(mean, sd).map_err(|e| Error::invalid(e.to_string()))?;
            Ok([normal.inverse_cdf(alpha / 2.0), normal.inverse_cdf(1.0 - alpha / 2.0)])
        }
        BootstrapMethod::Kernel => Ok(kernel_interval(&sorted, alpha)),
    }
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Silverman's rule: 0.9·min(sd, IQR/1.34)·n^(−1/5), falling back to sd when the IQR is 0.
fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let (_, sd) = mean_sd(sorted);
    let iqr = type7_quantile(sorted, 0.75) - type7_quantile(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (sorted.len() as f64).powf(-0.2)
}

fn type7_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quantiles of the Gaussian-kernel-smoothed distribution, by inverting its
/// CDF tabulated on a grid spanning the sample range ± 4 bandwidths.
fn kernel_interval(sorted: &[f64], alpha: f64) -> [f64; 2] {
    let h = silverman_bandwidth(sorted);
    let (first, last) = (sorted[0], sorted[sorted.len() - 1]);
    if !(h > 0.0) {
        return [first, last];
    }
    let lo = first - KERNEL_SPAN * h;
    let hi = last + KERNEL_SPAN * h;
    let step = (hi - lo) / (KERNEL_GRID - 1) as f64;
    let inv = 1.0 / (h * std::f64::consts::SQRT_2);
    let n = sorted.len() as f64;
    let grid: Vec<f64> = (0..KERNEL_GRID).map(|i| lo + i as f64 * step).collect();
    let cdf: Vec<f64> = grid
        .iter()
        .map(|&x| sorted.iter().map(|&s| 0.5 * erfc((s - x) * inv)).sum::<f64>() / n)
        .collect();
    let invert = |target: f64| -> f64 {
        let k = cdf.partition_point(|&c| c < target);
        if k == 0 {
            return grid[0];
        }
        if k >= KERNEL_GRID {
            return grid[KERNEL_GRID - 1];
        }
        let (c0, c1) = (cdf[k - 1], cdf[k]);
        let w = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        grid[k - 1] + w * step
    };
    [invert(alpha / 2.0), invert(1.0 - alpha / 2.0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::NormOrder;
    use crate::simulate::{generate_dataset, SimConfig};
    use nalgebra::DMatrix;

    #[test]
    fn index_arithmetic() {
        assert_eq!(quantile_indices(1999, 0.1), (100, 1900));
        assert_eq!(quantile_indices(199, 0.1), (10, 190));
        assert_eq!(quantile_indices(10, 0.01), (1, 10));
    }

    #[test]
    fn empirical_interval_uses_order_statistics() {
        let samples: Vec<f64> = (1..=1999).rev().map(f64::from).collect();
        assert_eq!(interval(&samples, 0.1, BootstrapMethod::Empirical).unwrap(), [100.0, 1900.0]);
    }

    #[test]
    fn kernel_and_gaussian_track_normal_quantiles() {
        // Evenly spaced normal scores: smoothed and fitted quantiles should sit near ±1.645.
        let normal = Normal::new(0.0, 1.0).unwrap();
        let samples: Vec<f64> = (1..=2000).map(|i| normal.inverse_cdf(i as f64 / 2001.0)).collect();
        for method in [BootstrapMethod::Kernel, BootstrapMethod::Gaussian] {
            let [lo, hi] = interval(&samples, 0.1, method).unwrap();
            assert!((lo + 1.645).abs() < 0.05 && (hi - 1.645).abs() < 0.05, "{method}: {lo} {hi}");
        }
    }

    #[test]
    fn constant_sample_collapses() {
        for method in [BootstrapMethod::Empirical, BootstrapMethod::Kernel, BootstrapMethod::Gaussian] {
            assert_eq!(interval(&[2.0; 300], 0.1, method).unwrap(), [2.0, 2.0]);
        }
    }

    #[test]
    fn degenerate_resamples_are_discarded() {
        // Six rows, three columns: a resample with fewer than four distinct
        // rows has a singular covariance (probability 11736/46656 ≈ 0.25).
        let values = DMatrix::from_row_slice(
            6,
            3,
            &[1.0, 0.0, 1.0, 0.0, 1.0, 0.3, 1.0, 1.0, 1.2, 2.0, 0.5, -0.4, -1.0, 0.7, 0.2, 0.4, -0.8, 0.9],
        );
        let data = Dataset::from_layout(values).unwrap();
        let spec = TauSpec::scalar(NormOrder::Finite(2.0), 100.0);
        let res = bootstrap_bounds(&data, &spec, 999, 0.1, BootstrapMethod::Empirical, 0).unwrap();
        let discarded = res.theta_minus.n_discarded;
        assert!((180..330).contains(&discarded), "{discarded}");
        assert_eq!(res.theta_plus.samples.len() + discarded, 999);
    }

    #[test]
    fn reproducible_and_brackets_estimate() {
        let cfg = SimConfig { seed: 21, rho: 0.3, ..SimConfig::default() };
        let (data, truth) = generate_dataset(&cfg, 1000).unwrap();
        let spec = TauSpec::scalar(NormOrder::Finite(2.0), 1.1 * truth.tau_star_2);
        let a = bootstrap_bounds(&data, &spec, 199, 0.1, BootstrapMethod::Empirical, 5).unwrap();
        let b = bootstrap_bounds(&data, &spec, 199, 0.1, BootstrapMethod::Empirical, 5).unwrap();
        assert_eq!(a.theta_minus, b.theta_minus);
        assert_eq!(a.theta_plus, b.theta_plus);
        assert_eq!(a.theta_minus.samples.len() + a.theta_minus.n_discarded, 199);
        assert!(a.theta_minus.ci[0] <= a.estimate.theta_minus + 1e-9 || a.theta_minus.ci[1] >= a.estimate.theta_minus);
        let g = a.with_method(BootstrapMethod::Gaussian).unwrap();
        assert!(g.theta_plus.ci[0] <= a.theta_plus.ci[1] && a.theta_plus.ci[0] <= g.theta_plus.ci[1]);
    }

    #[test]
    fn rejects_small_b() {
        let (data, _) = generate_dataset(&SimConfig::default(), 100).unwrap();
        let spec = TauSpec::scalar(NormOrder::Finite(2.0), 100.0);
        assert!(bootstrap_bounds(&data, &spec, 50, 0.1, BootstrapMethod::Empirical, 0).is_err());
    }
}
