use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

use crate::baselines::GammaEncoding;
use crate::bounds::{BoundsMethod, NormOrder};
use crate::inference::{BootstrapMethod, MIN_BOOTSTRAP_REPLICATES, MIN_REPLICATES};

#[derive(Debug, Parser)]
#[command(name = "leaky-iv", version, about = "Sharp ATE bounds for linear IV models with leaky instruments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sharp bounds on the treatment effect under a leakage budget.
    #[command(args_override_self = true)]
    Bounds(BoundsArgs),
    /// Monte Carlo test of the exclusion restriction.
    #[command(args_override_self = true)]
    Test(TestArgs),
    /// Bootstrap confidence intervals for both bounds.
    #[command(args_override_self = true)]
    Bootstrap(BootstrapArgs),
    /// Draw a synthetic dataset with known ground truth.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Backdoor, 2SLS and bounds across a grid of simulation settings.
    #[command(args_override_self = true)]
    Benchmark(BenchmarkArgs),
    /// Rejection rates of the exclusion test.
    #[command(args_override_self = true)]
    Power(PowerArgs),
    /// Bootstrap coverage of population bounds.
    #[command(args_override_self = true)]
    Coverage(CoverageArgs),
    /// Samples of θ(ρ) and the leakage along the confounding curve.
    #[command(args_override_self = true)]
    Curves(CurvesArgs),
    /// Metropolis–Hastings posterior for the bounded-leakage Bayesian model.
    #[command(args_override_self = true)]
    Bayes(BayesArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bounds(_) => "bounds",
            Command::Test(_) => "test",
            Command::Bootstrap(_) => "bootstrap",
            Command::Simulate(_) => "simulate",
            Command::Benchmark(_) => "benchmark",
            Command::Power(_) => "power",
            Command::Coverage(_) => "coverage",
            Command::Curves(_) => "curves",
            Command::Bayes(_) => "bayes",
        }
    }
}

/// Options every subcommand accepts; neither is recorded in the manifest.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Flat `key=value` file (keys are flag names) or a run manifest; flags given on the command line win.
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Where to write the run manifest [default: `<output>.manifest.json`].
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SeedArg {
    /// Master seed.
    #[arg(long, env = "LEAKYIV_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
#[group(id = "budget", required = true, multiple = false)]
pub struct BudgetArgs {
    /// Leakage budget τ on ‖γ‖_p.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Budget as a multiple of the minimum leakage τ̌_p of the data.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_ratio: Option<f64>,
    /// File of per-instrument thresholds |γ_j| ≤ τ_j (whitespace or comma separated; 0 = valid instrument).
    #[arg(long, value_name = "PATH")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_vector: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CovarianceArgs {
    /// Ridge added to the diagonal of the sample covariance.
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    /// Use the n − 1 denominator.
    #[arg(long)]
    pub unbiased: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BoundsArgs {
    /// Input CSV with header X,Y,Z1,...,Zd.
    #[arg(long, short = 'd', value_name = "CSV")]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub budget: BudgetArgs,
    /// Norm order p ≥ 1 or `inf` (ignored with --tau-vector).
    #[arg(long, default_value = "2")]
    #[serde(serialize_with = "display")]
    pub p: NormOrder,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub covariance: CovarianceArgs,
    /// Output JSON file [default: stdout].
    #[arg(long, short = 'o', value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Auto,
    ClosedForm,
    Bisection,
}

impl From<MethodArg> for BoundsMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => BoundsMethod::Auto,
            MethodArg::ClosedForm => BoundsMethod::ClosedForm,
            MethodArg::Bisection => BoundsMethod::Bisection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseArg {
    Gaussian,
    StudentT,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TestArgs {
    #[arg(long, short = 'd', value_name = "CSV")]
    pub data: PathBuf,
    /// Monte Carlo replicates.
    #[arg(long, short = 'B', visible_alias = "B", default_value_t = 999,
          value_parser = clap::value_parser!(u64).range(MIN_REPLICATES as u64..))]
    pub replicates: u64,
    /// Distribution of the synthetic null rows.
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    pub noise: NoiseArg,
    /// Degrees of freedom for `--noise student-t`.
    #[arg(long, default_value_t = 5.0)]
    pub dof: f64,
    #[arg(long, short = 'o', value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BootstrapArgs {
    #[arg(long, short = 'd', value_name = "CSV")]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub budget: BudgetArgs,
    #[arg(long, default_value = "2")]
    #[serde(serialize_with = "display")]
    pub p: NormOrder,
    #[arg(long, short = 'B', visible_alias = "B", default_value_t = 1999,
          value_parser = clap::value_parser!(u64).range(MIN_BOOTSTRAP_REPLICATES as u64..))]
    pub replicates: u64,
    /// Two-sided level; each interval has nominal coverage 1 − α.
    #[arg(long, default_value_t = 0.1, value_parser = parse_level)]
    pub alpha: f64,
    #[arg(long, default_value = "empirical")]
    #[serde(serialize_with = "display")]
    pub method: BootstrapMethod,
    #[arg(long, short = 'o', value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaZzArg {
    Diagonal,
    Toeplitz,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 5)]
    pub d_z: usize,
    #[arg(long, value_enum, default_value_t = SigmaZzArg::Diagonal)]
    pub sigma_zz: SigmaZzArg,
    /// Lag-one correlation of the Toeplitz instrument covariance.
    #[arg(long, default_value_t = 0.5)]
    pub autocorr: f64,
    /// Correlation of the treatment and outcome noise.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 2.0)]
    pub snr_x: f64,
    #[arg(long, default_value_t = 2.0)]
    pub snr_y: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub theta_star: f64,
    #[arg(long, default_value_t = 10.0)]
    pub sigma_yy: f64,
    /// Fraction of leakage weights set to zero.
    #[arg(long, default_value_t = 0.2)]
    pub gamma_sparsity: f64,
    /// Draw γ ⟂ β with this norm, fixing the population minimum leakage.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_check_target: Option<f64>,
    /// Number of rows.
    #[arg(short = 'n', long = "n", default_value_t = 1000)]
    pub n: usize,
    /// Writes `<prefix>.csv` and `<prefix>.truth.json`.
    #[arg(long, value_name = "PREFIX")]
    pub out_prefix: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BenchmarkArgs {
    /// Use the full 684-cell grid instead of the reduced 112-cell grid.
    #[arg(long)]
    pub full: bool,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(short = 'n', long = "n", default_value_t = 1000)]
    pub n: usize,
    /// Budget as a multiple of the oracle leakage ‖γ*‖₂.
    #[arg(long, default_value_t = 1.1)]
    pub tau_factor: f64,
    /// Extra rows `config_id,run,method,estimate_lo,estimate_hi` from other estimators.
    #[arg(long, value_name = "CSV")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external: Option<PathBuf>,
    /// Tidy results CSV [default: stdout].
    #[arg(long, short = 'o', value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Per-cell summary CSV.
    #[arg(long, value_name = "PATH")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PowerArgs {
    #[arg(long, default_value_t = 5)]
    pub d_z: usize,
    #[arg(long, default_value = "-0.75,-0.45,-0.15,0.15,0.45,0.75", allow_hyphen_values = true)]
    pub rho: List<f64>,
    #[arg(short = 'n', long = "n", default_value = "500,1000,2000")]
    pub n: List<usize>,
    /// Population minimum leakage values (0 is the null).
    #[arg(long, default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
    pub tau_check: List<f64>,
    #[arg(long, default_value_t = 500)]
    pub runs: usize,
    #[arg(long, short = 'B', visible_alias = "B", default_value_t = 2000,
          value_parser = clap::value_parser!(u64).range(MIN_REPLICATES as u64..))]
    pub replicates: u64,
    #[arg(long, default_value_t = 0.1, value_parser = parse_level)]
    pub alpha: f64,
    #[arg(long, short = 'o', value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CoverageArgs {
    #[arg(long, default_value_t = 5)]
    pub d_z: usize,
    #[arg(long, default_value = "-0.6,0,0.6", allow_hyphen_values = true)]
    pub rho: List<f64>,
    #[arg(long, default_value_t = 100)]
    pub datasets: usize,
    #[arg(short = 'n', long = "n", default_value_t = 1000)]
    pub n: usize,
    #[arg(long, short = 'B', visible_alias = "B", default_value_t = 500,
          value_parser = clap::value_parser!(u64).range(MIN_BOOTSTRAP_REPLICATES as u64..))]
    pub replicates: u64,
    #[arg(long, default_value_t = 0.1, value_parser = parse_level)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.1)]
    pub tau_factor: f64,
    #[arg(long, short = 'o', value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CurvesArgs {
    #[arg(long, short = 'd', value_name = "CSV")]
    pub data: PathBuf,
    #[arg(long, default_value = "2")]
    #[serde(serialize_with = "display")]
    pub p: NormOrder,
    /// Number of interior ρ points.
    #[arg(long, default_value_t = 1000)]
    pub grid_size: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub covariance: CovarianceArgs,
    #[arg(long, short = 'o', value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodingArg {
    AsPrinted,
    LinearRadius,
}

impl From<EncodingArg> for GammaEncoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::AsPrinted => GammaEncoding::AsPrinted,
            EncodingArg::LinearRadius => GammaEncoding::LinearRadius,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BayesArgs {
    #[arg(long, short = 'd', value_name = "CSV")]
    pub data: PathBuf,
    /// L2 budget on γ.
    #[arg(long)]
    pub tau: f64,
    /// How the radius fraction maps to ‖γ‖₂.
    #[arg(long, value_enum, default_value_t = EncodingArg::AsPrinted)]
    pub encoding: EncodingArg,
    #[arg(long, default_value_t = 2000)]
    pub n_iter: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1000)]
    pub adapt_iters: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Independent chains, run in parallel.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Sample the prior only.
    #[arg(long)]
    pub prior_only: bool,
    /// Level of the reported credible interval.
    #[arg(long, default_value_t = 0.1, value_parser = parse_level)]
    pub alpha: f64,
    /// Single-column CSV of θ draws (chains concatenated).
    #[arg(long, value_name = "PATH")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<PathBuf>,
    /// Diagnostics JSON [default: stdout].
    #[arg(long, short = 'o', value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

/// Comma-separated list flag; one occurrence replaces any earlier one.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|item| item.trim().parse::<T>().map_err(|e| format!("`{}`: {e}", item.trim())))
            .collect::<Result<Vec<_>, _>>()
            .and_then(|v| if v.is_empty() { Err("empty list".into()) } else { Ok(List(v)) })
    }
}

impl<T: fmt::Display> Serialize for List<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(&self.0.iter().map(ToString::to_string).collect::<Vec<_>>().join(","))
    }
}

fn display<T: fmt::Display, S: Serializer>(value: &T, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.collect_str(value)
}

fn parse_level(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("must lie in (0, 1), got {a}"))
    }
}
