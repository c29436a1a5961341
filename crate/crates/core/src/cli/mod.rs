//! Command-line front end. Every file output gets a [`RunManifest`] next to it.

mod args;
mod config;
mod manifest;

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use serde::{Deserialize, Serialize};

pub use args::{Cli, Command};
pub use config::{config_tokens, expand_args};
pub use manifest::{default_manifest_path, sha256_file, RunManifest};

use crate::baselines::{run_chains, BayesConfig, BayesPosterior, ChainSettings};
use crate::bounds::{
    ate_bounds_vector, bounds_from_geometry, curve_samples, leakage_geometry, rho_grid, write_curves_csv, AteBounds,
    NormOrder, TauSpec,
};
use crate::covariance::{sample_covariance, CovarianceBlocks, CovarianceOptions, Dataset};
use crate::error::Error;
use crate::experiments::{
    run_benchmark, run_coverage, run_power, write_rows_csv, BenchmarkGrid, BenchmarkSettings, CoverageSettings,
    PowerSettings,
};
use crate::inference::{bootstrap_bounds, exclusion_test_with, BootstrapResult, GaussianSampler, NullSampler, StudentTSampler};
use crate::simulate::{generate_dataset, SigmaZzKind, SimConfig};
use args::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let config_file = config::config_path(&args);
    let args = match expand_args(args) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };

    let start = Instant::now();
    let mut ctx = Context::default();
    let name = cli.command.name();
    let (params, seed, common) = describe(&cli.command);
    if let Some(path) = &config_file {
        if let Err(e) = ctx.input(path) {
            return report_error(e);
        }
    }
    let outcome = match &cli.command {
        Command::Bounds(a) => cmd_bounds(a, &mut ctx),
        Command::Test(a) => cmd_test(a, &mut ctx),
        Command::Bootstrap(a) => cmd_bootstrap(a, &mut ctx),
        Command::Simulate(a) => cmd_simulate(a, &mut ctx),
        Command::Benchmark(a) => cmd_benchmark(a, &mut ctx),
        Command::Power(a) => cmd_power(a, &mut ctx),
        Command::Coverage(a) => cmd_coverage(a, &mut ctx),
        Command::Curves(a) => cmd_curves(a, &mut ctx),
        Command::Bayes(a) => cmd_bayes(a, &mut ctx),
    };
    let code = match outcome {
        Ok(code) => code,
        Err(e) => return report_error(e),
    };

    let manifest_path = common.manifest.clone().or_else(|| ctx.primary.as_deref().map(default_manifest_path));
    if let Some(path) = manifest_path {
        let manifest = RunManifest {
            command: name.to_owned(),
            params,
            seed,
            inputs: ctx.inputs,
            outputs: ctx.outputs,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            duration_secs: start.elapsed().as_secs_f64(),
        };
        if let Err(e) = manifest.write(&path) {
            return report_error(e.into());
        }
    }
    code
}

fn report_error(e: CliError) -> i32 {
    match e {
        CliError::Usage(msg) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        CliError::Run(e) => {
            eprintln!("error: {e}");
            if e.is_infeasible() {
                EXIT_INFEASIBLE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn describe(command: &Command) -> (serde_json::Value, Option<u64>, Common) {
    fn parts<T: Serialize>(a: &T, seed: Option<u64>, common: &Common) -> (serde_json::Value, Option<u64>, Common) {
        (serde_json::to_value(a).unwrap_or(serde_json::Value::Null), seed, common.clone())
    }
    match command {
        Command::Bounds(a) => parts(a, None, &a.common),
        Command::Test(a) => parts(a, Some(a.seed.seed), &a.common),
        Command::Bootstrap(a) => parts(a, Some(a.seed.seed), &a.common),
        Command::Simulate(a) => parts(a, Some(a.seed.seed), &a.common),
        Command::Benchmark(a) => parts(a, Some(a.seed.seed), &a.common),
        Command::Power(a) => parts(a, Some(a.seed.seed), &a.common),
        Command::Coverage(a) => parts(a, Some(a.seed.seed), &a.common),
        Command::Curves(a) => parts(a, None, &a.common),
        Command::Bayes(a) => parts(a, Some(a.seed.seed), &a.common),
    }
}

/// Files read and written during one run.
#[derive(Default)]
struct Context {
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    /// First file written; the manifest goes next to it.
    primary: Option<PathBuf>,
}

impl Context {
    fn input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    fn dataset(&mut self, path: &Path) -> CliResult<Dataset> {
        let data = Dataset::read_csv(path)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        self.input(path)?;
        Ok(data)
    }

    /// Writes to `out`, or to stdout when no path is given.
    fn emit(&mut self, out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> crate::Result<()>) -> CliResult<()> {
        match out {
            Some(path) => {
                let mut w = BufWriter::new(File::create(path)?);
                write(&mut w)?;
                w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
                self.outputs.insert(path.display().to_string(), sha256_file(path)?);
                self.primary.get_or_insert_with(|| path.to_path_buf());
            }
            None => {
                let mut w = std::io::stdout().lock();
                write(&mut w)?;
                w.flush()?;
            }
        }
        Ok(())
    }

    fn emit_json<T: Serialize>(&mut self, out: Option<&Path>, value: &T) -> CliResult<()> {
        self.emit(out, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }
}

fn covariance(data: &Dataset, args: &CovarianceArgs) -> CliResult<CovarianceBlocks> {
    if !(args.ridge >= 0.0 && args.ridge.is_finite()) {
        return Err(CliError::Usage(format!("--ridge must be nonnegative, got {}", args.ridge)));
    }
    Ok(sample_covariance(data, &CovarianceOptions { ridge: args.ridge, unbiased: args.unbiased })?)
}

/// Per-instrument thresholds separated by whitespace, commas or newlines.
pub fn read_tau_vector(path: &Path) -> crate::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::invalid(format!("{}: `{t}` is not a number", path.display()))))
        .collect()
}

/// Turns the budget flags into a concrete spec; a ratio is resolved against the data's τ̌_p.
fn resolve_budget(budget: &BudgetArgs, p: NormOrder, blocks: &CovarianceBlocks, ctx: &mut Context) -> CliResult<TauSpec> {
    if let Some(path) = &budget.tau_vector {
        ctx.input(path)?;
        return Ok(TauSpec::Vector { tau: read_tau_vector(path)? });
    }
    let tau = match (budget.tau, budget.tau_ratio) {
        (Some(t), _) => t,
        (None, Some(r)) => {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(CliError::Usage(format!("--tau-ratio must be nonnegative, got {r}")));
            }
            r * leakage_geometry(blocks, p)?.tau_check
        }
        (None, None) => return Err(CliError::Usage("one of --tau, --tau-ratio, --tau-vector is required".into())),
    };
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(CliError::Usage(format!("--tau must be finite and nonnegative, got {tau}")));
    }
    Ok(TauSpec::Scalar { p, tau })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

/// JSON report of the `bounds` command. Bound fields are null when infeasible.
/// In vector mode the check quantities refer to the rescaled problem
/// max_j |γ_j|/τ_j ≤ 1, so `tau_check` ≤ 1 iff feasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub theta_minus: Option<f64>,
    pub theta_plus: Option<f64>,
    pub rho_minus: Option<f64>,
    pub rho_plus: Option<f64>,
    pub theta_check: Option<f64>,
    pub rho_check: Option<f64>,
    pub theta_check_interval: Option<[f64; 2]>,
    pub rho_check_interval: Option<[f64; 2]>,
    pub tau_check: Option<f64>,
    pub tau: TauValue,
    pub p: NormOrder,
    pub feasible: bool,
    pub boundary_clipped: Option<bool>,
    pub mode: String,
    pub n: usize,
    pub d_z: usize,
}

fn mid(v: [f64; 2]) -> f64 {
    0.5 * (v[0] + v[1])
}

impl BoundsReport {
    fn new(spec: &TauSpec, data: &Dataset) -> Self {
        let (tau, p, mode) = match spec {
            TauSpec::Scalar { p, tau } => (TauValue::Scalar(*tau), *p, "scalar"),
            TauSpec::Vector { tau } => (TauValue::Vector(tau.clone()), NormOrder::Infinity, "vector"),
        };
        Self {
            theta_minus: None,
            theta_plus: None,
            rho_minus: None,
            rho_plus: None,
            theta_check: None,
            rho_check: None,
            theta_check_interval: None,
            rho_check_interval: None,
            tau_check: None,
            tau,
            p,
            feasible: false,
            boundary_clipped: None,
            mode: mode.to_owned(),
            n: data.n(),
            d_z: data.d_z(),
        }
    }

    fn with_check(mut self, theta_check: [f64; 2], rho_check: [f64; 2], tau_check: f64) -> Self {
        self.theta_check = Some(mid(theta_check));
        self.rho_check = Some(mid(rho_check));
        self.theta_check_interval = Some(theta_check);
        self.rho_check_interval = Some(rho_check);
        self.tau_check = Some(tau_check);
        self
    }

    fn with_bounds(self, b: &AteBounds) -> Self {
        let g = &b.geometry;
        let mut r = self.with_check(g.theta_check, g.rho_check, g.tau_check);
        r.theta_minus = Some(b.theta_minus);
        r.theta_plus = Some(b.theta_plus);
        r.rho_minus = Some(b.rho_minus);
        r.rho_plus = Some(b.rho_plus);
        r.boundary_clipped = Some(b.boundary_clipped);
        r.feasible = true;
        r
    }
}

fn cmd_bounds(a: &BoundsArgs, ctx: &mut Context) -> CliResult<i32> {
    let data = ctx.dataset(&a.data)?;
    let blocks = covariance(&data, &a.covariance)?;
    let spec = resolve_budget(&a.budget, a.p, &blocks, ctx)?;
    spec.validate(data.d_z())?;
    let report = BoundsReport::new(&spec, &data);
    let (report, failure) = match &spec {
        TauSpec::Scalar { p, tau } => {
            let geometry = leakage_geometry(&blocks, *p)?;
            let check = (geometry.theta_check, geometry.rho_check, geometry.tau_check);
            match bounds_from_geometry(geometry, *tau, a.method.into()) {
                Ok(b) => (report.with_bounds(&b), None),
                Err(e) if e.is_infeasible() => (report.with_check(check.0, check.1, check.2), Some(e)),
                Err(e) => return Err(e.into()),
            }
        }
        TauSpec::Vector { tau } => match ate_bounds_vector(&blocks, tau) {
            Ok(b) => (report.with_bounds(&b), None),
            Err(e @ Error::Infeasible { tau_check, .. }) => (BoundsReport { tau_check: Some(tau_check), ..report }, Some(e)),
            Err(e) if e.is_infeasible() => (report, Some(e)),
            Err(e) => return Err(e.into()),
        },
    };
    ctx.emit_json(a.out.as_deref(), &report)?;
    Ok(match failure {
        Some(e) => {
            eprintln!("error: {e}");
            EXIT_INFEASIBLE
        }
        None => EXIT_OK,
    })
}

fn cmd_test(a: &TestArgs, ctx: &mut Context) -> CliResult<i32> {
    let data = ctx.dataset(&a.data)?;
    let student;
    let sampler: &dyn NullSampler = match a.noise {
        NoiseArg::Gaussian => &GaussianSampler,
        NoiseArg::StudentT => {
            student = StudentTSampler::new(a.dof).map_err(|e| CliError::Usage(e.to_string()))?;
            &student
        }
    };
    let result = exclusion_test_with(&data, a.replicates as usize, a.seed.seed, sampler)?;
    ctx.emit_json(a.out.as_deref(), &result)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub tau: TauValue,
    pub p: NormOrder,
}

/// JSON report of the `bootstrap` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub estimate: BootstrapEstimate,
    pub alpha: f64,
    pub method: String,
    #[serde(rename = "B")]
    pub b: usize,
    pub n_discarded: usize,
    pub theta_minus: BootstrapResult,
    pub theta_plus: BootstrapResult,
}

fn cmd_bootstrap(a: &BootstrapArgs, ctx: &mut Context) -> CliResult<i32> {
    let data = ctx.dataset(&a.data)?;
    let blocks = sample_covariance(&data, &CovarianceOptions::default())?;
    let spec = resolve_budget(&a.budget, a.p, &blocks, ctx)?;
    let out = bootstrap_bounds(&data, &spec, a.replicates as usize, a.alpha, a.method, a.seed.seed)?;
    let (tau, p) = match &spec {
        TauSpec::Scalar { p, tau } => (TauValue::Scalar(*tau), *p),
        TauSpec::Vector { tau } => (TauValue::Vector(tau.clone()), NormOrder::Infinity),
    };
    let report = BootstrapReport {
        estimate: BootstrapEstimate {
            theta_minus: out.estimate.theta_minus,
            theta_plus: out.estimate.theta_plus,
            rho_minus: out.estimate.rho_minus,
            rho_plus: out.estimate.rho_plus,
            tau,
            p,
        },
        alpha: a.alpha,
        method: a.method.to_string(),
        b: a.replicates as usize,
        n_discarded: out.theta_minus.n_discarded,
        theta_minus: out.theta_minus,
        theta_plus: out.theta_plus,
    };
    ctx.emit_json(a.out.as_deref(), &report)?;
    Ok(EXIT_OK)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_simulate(a: &SimulateArgs, ctx: &mut Context) -> CliResult<i32> {
    let config = SimConfig {
        d_z: a.d_z,
        sigma_zz_kind: match a.sigma_zz {
            SigmaZzArg::Diagonal => SigmaZzKind::Diagonal,
            SigmaZzArg::Toeplitz => SigmaZzKind::Toeplitz { autocorr: a.autocorr },
        },
        rho: a.rho,
        snr_x: a.snr_x,
        snr_y: a.snr_y,
        theta_star: a.theta_star,
        sigma_yy: a.sigma_yy,
        gamma_sparsity: a.gamma_sparsity,
        tau_check_target: a.tau_check_target,
        seed: a.seed.seed,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (data, truth) = generate_dataset(&config, a.n)?;
    let csv = with_suffix(&a.out_prefix, ".csv");
    let json = with_suffix(&a.out_prefix, ".truth.json");
    ctx.primary = Some(a.out_prefix.clone());
    ctx.emit(Some(&csv), |w| data.write_csv(w))?;
    ctx.emit_json(Some(&json), &truth.summary_json())?;
    Ok(EXIT_OK)
}

/// Tidy benchmark row with a free-form method label (external estimators included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidyRow<'a> {
    pub config_id: usize,
    pub run: usize,
    pub method: Cow<'a, str>,
    pub estimate_lo: f64,
    pub estimate_hi: f64,
}

fn cmd_benchmark(a: &BenchmarkArgs, ctx: &mut Context) -> CliResult<i32> {
    let grid = if a.full { BenchmarkGrid::full() } else { BenchmarkGrid::reduced() };
    let n_cells = grid.cells().len();
    let external: Vec<TidyRow<'static>> = match &a.external {
        Some(path) => {
            ctx.input(path)?;
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(Error::from)?;
            let rows = rdr.deserialize().collect::<Result<Vec<TidyRow<'static>>, _>>().map_err(Error::from)?;
            if let Some(bad) = rows.iter().find(|r| r.config_id >= n_cells || r.run >= a.runs) {
                return Err(Error::invalid(format!(
                    "external row (config_id {}, run {}) is outside the {n_cells}-cell grid with {} runs",
                    bad.config_id, bad.run, a.runs
                ))
                .into());
            }
            rows
        }
        None => Vec::new(),
    };
    let settings = BenchmarkSettings { grid, runs: a.runs, n: a.n, tau_factor: a.tau_factor, seed: a.seed.seed };
    let out = run_benchmark(&settings)?;
    let mut rows: Vec<TidyRow> = out
        .records
        .iter()
        .map(|r| TidyRow {
            config_id: r.config_id,
            run: r.run,
            method: Cow::Owned(serde_json::to_value(r.method).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()),
            estimate_lo: r.estimate_lo,
            estimate_hi: r.estimate_hi,
        })
        .chain(external)
        .collect();
    rows.sort_by_key(|r| (r.config_id, r.run));
    ctx.emit(a.out.as_deref(), |w| write_rows_csv(&rows, w))?;
    if let Some(path) = &a.summary {
        ctx.emit(Some(path), |w| write_rows_csv(&out.cells, w))?;
    }
    eprintln!(
        "{} of {} cells contain theta* ({:.2}%)",
        out.cells.iter().filter(|c| c.contains_theta_star).count(),
        out.cells.len(),
        100.0 * out.coverage_fraction()
    );
    Ok(EXIT_OK)
}

fn cmd_power(a: &PowerArgs, ctx: &mut Context) -> CliResult<i32> {
    let settings = PowerSettings {
        d_z: a.d_z,
        rho: a.rho.0.clone(),
        n: a.n.0.clone(),
        tau_check: a.tau_check.0.clone(),
        runs: a.runs,
        b: a.replicates as usize,
        alpha: a.alpha,
        seed: a.seed.seed,
    };
    let rows = run_power(&settings)?;
    ctx.emit(a.out.as_deref(), |w| write_rows_csv(&rows, w))?;
    Ok(EXIT_OK)
}

fn cmd_coverage(a: &CoverageArgs, ctx: &mut Context) -> CliResult<i32> {
    let settings = CoverageSettings {
        d_z: a.d_z,
        rho: a.rho.0.clone(),
        datasets: a.datasets,
        n: a.n,
        b: a.replicates as usize,
        alpha: a.alpha,
        tau_factor: a.tau_factor,
        seed: a.seed.seed,
    };
    let rows = run_coverage(&settings)?;
    ctx.emit(a.out.as_deref(), |w| write_rows_csv(&rows, w))?;
    Ok(EXIT_OK)
}

fn cmd_curves(a: &CurvesArgs, ctx: &mut Context) -> CliResult<i32> {
    if a.grid_size == 0 {
        return Err(CliError::Usage("--grid-size must be positive".into()));
    }
    let data = ctx.dataset(&a.data)?;
    let blocks = covariance(&data, &a.covariance)?;
    let points = curve_samples(&blocks, a.p, &rho_grid(a.grid_size))?;
    ctx.emit(a.out.as_deref(), |w| write_curves_csv(&points, w))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub seed: u64,
    pub draws: usize,
    pub theta_mean: f64,
    /// Acceptance rate per block: beta, b, w_kappa, w_rho, theta, log_var_z, log_var_x, log_var_y.
    pub acceptance: Vec<f64>,
    pub steps: Vec<f64>,
}

/// JSON diagnostics of the `bayes` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesReport {
    pub tau: f64,
    pub encoding: String,
    pub alpha: f64,
    pub theta_mean: f64,
    pub credible_interval: [f64; 2],
    pub chains: Vec<ChainReport>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn cmd_bayes(a: &BayesArgs, ctx: &mut Context) -> CliResult<i32> {
    let data = ctx.dataset(&a.data)?;
    let config = BayesConfig {
        tau: a.tau,
        chain: ChainSettings { n_iter: a.n_iter, burn_in: a.burn_in, adapt_iters: a.adapt_iters, thin: a.thin },
        encoding: a.encoding.into(),
        prior_only: a.prior_only,
        seed: a.seed.seed,
        ..BayesConfig::default()
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let posteriors = run_chains(&data, &config, a.chains)?;
    let pooled: Vec<f64> = posteriors.iter().flat_map(|p| p.theta.iter().copied()).collect();
    if pooled.is_empty() {
        return Err(Error::invalid("no draws were kept; increase --n-iter or lower --thin").into());
    }
    let (lo, hi) = BayesPosterior { theta: pooled.clone(), kappa: vec![], rho: vec![], acceptance: vec![], steps: vec![], states: vec![] }
        .credible_bounds(a.alpha);
    let report = BayesReport {
        tau: a.tau,
        encoding: serde_json::to_value(a.encoding).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
        alpha: a.alpha,
        theta_mean: mean(&pooled),
        credible_interval: [lo, hi],
        chains: posteriors
            .iter()
            .enumerate()
            .map(|(k, p)| ChainReport {
                seed: crate::rng::child_seed(config.seed, k as u64),
                draws: p.theta.len(),
                theta_mean: mean(&p.theta),
                acceptance: p.acceptance.clone(),
                steps: p.steps.clone(),
            })
            .collect(),
    };
    if let Some(path) = &a.draws {
        ctx.emit(Some(path), |w| {
            writeln!(w, "theta")?;
            for t in &pooled {
                writeln!(w, "{t}")?;
            }
            Ok(())
        })?;
    }
    ctx.emit_json(a.out.as_deref(), &report)?;
    Ok(EXIT_OK)
}
