//! Simulation studies: point-estimator benchmark, exclusion-test power and
//! bootstrap coverage. Cells fan out over rayon; every (cell, run) pair owns
//! a seed derived from the master seed, so output is schedule-independent and
//! ordered by config_id.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::backdoor_ols;
use crate::bounds::{ate_bounds_scalar, NormOrder, TauSpec};
use crate::covariance::{sample_covariance, CovarianceOptions};
use crate::error::Result;
use crate::inference::{bootstrap_bounds, exclusion_test, two_stage_least_squares, BootstrapMethod};
use crate::rng::child_seed;
use crate::simulate::{generate_dataset, SigmaZzKind, SimConfig};

/// Cartesian grid of simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkGrid {
    pub d_z: Vec<usize>,
    pub sigma_zz: Vec<SigmaZzKind>,
    pub rho: Vec<f64>,
    pub snr_x: Vec<f64>,
    pub snr_y: Vec<f64>,
}

impl BenchmarkGrid {
    /// 684 cells: d_z ∈ {5, 10}, diagonal/Toeplitz, ρ ∈ {−0.9, …, 0.9}, SNRs ∈ {0.5, 1, 2}.
    pub fn full() -> Self {
        Self {
            d_z: vec![5, 10],
            sigma_zz: vec![SigmaZzKind::Diagonal, SigmaZzKind::TOEPLITZ],
            rho: (-9..=9).map(|i| i as f64 / 10.0).collect(),
            snr_x: vec![0.5, 1.0, 2.0],
            snr_y: vec![0.5, 1.0, 2.0],
        }
    }

    /// 112 cells: ρ ∈ {−0.9, −0.6, …, 0.9} and SNRs ∈ {0.5, 2}.
    pub fn reduced() -> Self {
        Self {
            rho: (-3..=3).map(|i| i as f64 * 0.3).collect(),
            snr_x: vec![0.5, 2.0],
            snr_y: vec![0.5, 2.0],
            ..Self::full()
        }
    }

    pub fn cells(&self) -> Vec<SimConfig> {
        let mut cells = Vec::new();
        for &d_z in &self.d_z {
            for &kind in &self.sigma_zz {
                for &rho in &self.rho {
                    for &snr_x in &self.snr_x {
                        for &snr_y in &self.snr_y {
                            cells.push(SimConfig { d_z, sigma_zz_kind: kind, rho, snr_x, snr_y, ..SimConfig::default() });
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Backdoor,
    #[serde(rename = "2sls")]
    TwoSls,
    Leakyiv,
}

/// One tidy benchmark row; point estimators have `estimate_lo == estimate_hi`.
/// Failed fits (e.g. an infeasible budget) are recorded as NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub config_id: usize,
    pub run: usize,
    pub method: EstimatorKind,
    pub estimate_lo: f64,
    pub estimate_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSettings {
    pub grid: BenchmarkGrid,
    pub runs: usize,
    pub n: usize,
    /// Budget as a multiple of the oracle leakage τ*₂.
    pub tau_factor: f64,
    pub seed: u64,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        Self { grid: BenchmarkGrid::reduced(), runs: 10, n: 1000, tau_factor: 1.1, seed: 0 }
    }
}

/// Per-cell averages of the LeakyIV bounds over feasible runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub config_id: usize,
    pub d_z: usize,
    pub sigma_zz: String,
    pub rho: f64,
    pub snr_x: f64,
    pub snr_y: f64,
    pub mean_lo: f64,
    pub mean_hi: f64,
    pub feasible_runs: usize,
    pub contains_theta_star: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutput {
    pub records: Vec<BenchmarkRecord>,
    pub cells: Vec<CellSummary>,
}

impl BenchmarkOutput {
    pub fn coverage_fraction(&self) -> f64 {
        self.cells.iter().filter(|c| c.contains_theta_star).count() as f64 / self.cells.len().max(1) as f64
    }
}

fn run_seed(master: u64, config_id: usize, run: usize) -> u64 {
    child_seed(child_seed(master, config_id as u64), run as u64)
}

pub fn run_benchmark(settings: &BenchmarkSettings) -> Result<BenchmarkOutput> {
    let cells = settings.grid.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..settings.runs).map(move |r| (c, r))).collect();
    let per_job: Vec<Result<[BenchmarkRecord; 3]>> = jobs
        .par_iter()
        .map(|&(config_id, run)| {
            let cfg = SimConfig { seed: run_seed(settings.seed, config_id, run), ..cells[config_id].clone() };
            let (data, truth) = generate_dataset(&cfg, settings.n)?;
            let record = |method, lo, hi| BenchmarkRecord { config_id, run, method, estimate_lo: lo, estimate_hi: hi };
            let backdoor = backdoor_ols(&data).map(|e| e.estimate).unwrap_or(f64::NAN);
            let blocks = sample_covariance(&data, &CovarianceOptions::default());
            let tsls = blocks.as_ref().ok().and_then(|b| two_stage_least_squares(b).ok()).unwrap_or(f64::NAN);
            let (lo, hi) = blocks
                .as_ref()
                .ok()
                .and_then(|b| ate_bounds_scalar(b, NormOrder::Finite(2.0), settings.tau_factor * truth.tau_star_2).ok())
                .map_or((f64::NAN, f64::NAN), |b| (b.theta_minus, b.theta_plus));
            Ok([
                record(EstimatorKind::Backdoor, backdoor, backdoor),
                record(EstimatorKind::TwoSls, tsls, tsls),
                record(EstimatorKind::Leakyiv, lo, hi),
            ])
        })
        .collect();
    let mut records = Vec::with_capacity(jobs.len() * 3);
    for r in per_job {
        records.extend(r?);
    }

    let summaries = cells
        .iter()
        .enumerate()
        .map(|(config_id, cfg)| {
            let feasible: Vec<&BenchmarkRecord> = records
                .iter()
                .filter(|r| r.config_id == config_id && r.method == EstimatorKind::Leakyiv && r.estimate_lo.is_finite())
                .collect();
            let k = feasible.len();
            let mean = |f: fn(&BenchmarkRecord) -> f64| feasible.iter().map(|r| f(r)).sum::<f64>() / k.max(1) as f64;
            let (mean_lo, mean_hi) = if k > 0 { (mean(|r| r.estimate_lo), mean(|r| r.estimate_hi)) } else { (f64::NAN, f64::NAN) };
            CellSummary {
                config_id,
                d_z: cfg.d_z,
                sigma_zz: match cfg.sigma_zz_kind {
                    SigmaZzKind::Diagonal => "diagonal".into(),
                    SigmaZzKind::Toeplitz { .. } => "toeplitz".into(),
                },
                rho: cfg.rho,
                snr_x: cfg.snr_x,
                snr_y: cfg.snr_y,
                mean_lo,
                mean_hi,
                feasible_runs: k,
                contains_theta_star: k > 0 && mean_lo <= cfg.theta_star && cfg.theta_star <= mean_hi,
            }
        })
        .collect();
    Ok(BenchmarkOutput { records, cells: summaries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSettings {
    pub d_z: usize,
    pub rho: Vec<f64>,
    pub n: Vec<usize>,
    /// Population minimum leakage τ̌₂ (0 is the null).
    pub tau_check: Vec<f64>,
    pub runs: usize,
    pub b: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for PowerSettings {
    fn default() -> Self {
        Self {
            d_z: 5,
            rho: vec![-0.75, -0.45, -0.15, 0.15, 0.45, 0.75],
            n: vec![500, 1000, 2000],
            tau_check: (0..=10).map(|i| i as f64 / 10.0).collect(),
            runs: 500,
            b: 2000,
            alpha: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub rho: f64,
    pub n: usize,
    pub tau_check: f64,
    pub runs: usize,
    pub rejection_rate: f64,
    pub std_error: f64,
    /// Runs where the test could not be computed (e.g. unrepairable null covariance).
    pub n_failed: usize,
}

pub fn run_power(settings: &PowerSettings) -> Result<Vec<PowerRow>> {
    let mut cells = Vec::new();
    for &rho in &settings.rho {
        for &n in &settings.n {
            for &t in &settings.tau_check {
                cells.push((rho, n, t));
            }
        }
    }
    cells
        .iter()
        .enumerate()
        .map(|(cell_id, &(rho, n, t))| {
            let outcomes: Vec<Result<Option<bool>>> = (0..settings.runs)
                .into_par_iter()
                .map(|run| {
                    let seed = run_seed(settings.seed, cell_id, run);
                    let cfg = SimConfig { d_z: settings.d_z, rho, tau_check_target: Some(t), seed, ..SimConfig::default() };
                    let (data, _) = generate_dataset(&cfg, n)?;
                    Ok(exclusion_test(&data, settings.b, child_seed(seed, 1)).ok().map(|r| r.p_value <= settings.alpha))
                })
                .collect();
            let mut rejections = 0usize;
            let mut ok = 0usize;
            for o in outcomes {
                if let Some(rej) = o? {
                    ok += 1;
                    rejections += rej as usize;
                }
            }
            let rate = rejections as f64 / ok.max(1) as f64;
            Ok(PowerRow {
                rho,
                n,
                tau_check: t,
                runs: ok,
                rejection_rate: rate,
                std_error: (rate * (1.0 - rate) / ok.max(1) as f64).sqrt(),
                n_failed: settings.runs - ok,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSettings {
    pub d_z: usize,
    pub rho: Vec<f64>,
    pub datasets: usize,
    pub n: usize,
    pub b: usize,
    pub alpha: f64,
    pub tau_factor: f64,
    pub seed: u64,
}

impl Default for CoverageSettings {
    fn default() -> Self {
        Self { d_z: 5, rho: vec![-0.6, 0.0, 0.6], datasets: 100, n: 1000, b: 500, alpha: 0.1, tau_factor: 1.1, seed: 0 }
    }
}

/// Marginal coverage of one population bound by one interval method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub rho: f64,
    pub method: BootstrapMethod,
    pub target: crate::inference::BoundSide,
    pub coverage: f64,
    pub std_error: f64,
    pub datasets: usize,
    pub n_failed: usize,
}

/// Bootstrap intervals on each dataset versus the bounds computed from the
/// population covariance at the same budget (the Σ-oracle).
pub fn run_coverage(settings: &CoverageSettings) -> Result<Vec<CoverageRow>> {
    use crate::inference::BoundSide;
    const METHODS: [BootstrapMethod; 3] = [BootstrapMethod::Empirical, BootstrapMethod::Kernel, BootstrapMethod::Gaussian];
    let mut rows = Vec::new();
    for (cell_id, &rho) in settings.rho.iter().enumerate() {
        // Per dataset: Some([[minus_hit, plus_hit]; 3 methods]) or None if the fit failed.
        let hits: Vec<Result<Option<[[bool; 2]; 3]>>> = (0..settings.datasets)
            .into_par_iter()
            .map(|run| {
                let seed = run_seed(settings.seed, cell_id, run);
                let cfg = SimConfig { d_z: settings.d_z, rho, seed, ..SimConfig::default() };
                let (data, truth) = generate_dataset(&cfg, settings.n)?;
                let tau = settings.tau_factor * truth.tau_star_2;
                let oracle = ate_bounds_scalar(&truth.blocks()?, NormOrder::Finite(2.0), tau)?;
                let spec = TauSpec::scalar(NormOrder::Finite(2.0), tau);
                let Ok(boot) = bootstrap_bounds(&data, &spec, settings.b, settings.alpha, BootstrapMethod::Empirical, child_seed(seed, 1))
                else {
                    return Ok(None);
                };
                let mut out = [[false; 2]; 3];
                for (m, method) in METHODS.iter().enumerate() {
                    let r = boot.with_method(*method)?;
                    let inside = |ci: [f64; 2], v: f64| ci[0] <= v && v <= ci[1];
                    out[m] = [inside(r.theta_minus.ci, oracle.theta_minus), inside(r.theta_plus.ci, oracle.theta_plus)];
                }
                Ok(Some(out))
            })
            .collect();
        let mut ok: Vec<[[bool; 2]; 3]> = Vec::new();
        for h in hits {
            if let Some(v) = h? {
                ok.push(v);
            }
        }
        let n_ok = ok.len();
        for (m, method) in METHODS.iter().enumerate() {
            for (side_idx, target) in [BoundSide::Minus, BoundSide::Plus].into_iter().enumerate() {
                let covered = ok.iter().filter(|h| h[m][side_idx]).count();
                let rate = covered as f64 / n_ok.max(1) as f64;
                rows.push(CoverageRow {
                    rho,
                    method: *method,
                    target,
                    coverage: rate,
                    std_error: (rate * (1.0 - rate) / n_ok.max(1) as f64).sqrt(),
                    datasets: n_ok,
                    n_failed: settings.datasets - n_ok,
                });
            }
        }
    }
    Ok(rows)
}

/// Writes serializable rows as CSV with a header.
pub fn write_rows_csv<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}
