//! C ABI over the leaky-iv library.
//!
//! Every fallible call returns a [`LivStatus`]; on failure a message is kept
//! per thread and readable with [`liv_last_error_message`]. Objects cross the
//! boundary as opaque handles that the caller releases with the matching
//! `*_free` function. Matrices are row-major with columns `[Z1..Zd, X, Y]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use leaky_iv::bounds::leakage_geometry;
use leaky_iv::covariance::{sample_covariance, CovarianceBlocks, CovarianceOptions, Dataset};
use leaky_iv::inference::{bootstrap_bounds, exclusion_test, BootstrapMethod};
use leaky_iv::simulate::{generate_dataset, SigmaZzKind, SimConfig};
use leaky_iv::{ate_bounds_scalar, ate_bounds_vector, AteBounds, Error, NormOrder, TauSpec};
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LivStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NotPositiveDefinite = 3,
    DegenerateData = 4,
    Irrelevance = 5,
    DegenerateKappa = 6,
    DomainError = 7,
    Infeasible = 8,
    AllZeroTau = 9,
    TooFewInstruments = 10,
    NullNotRepairable = 11,
    TooManyDiscarded = 12,
    UnachievableSnr = 13,
    DegenerateDirection = 14,
    RankDeficient = 15,
    ChainDiverged = 16,
    Io = 17,
    Panic = 99,
}

impl From<&Error> for LivStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidInput(_) => LivStatus::InvalidInput,
            Error::NotPositiveDefinite { .. } => LivStatus::NotPositiveDefinite,
            Error::DegenerateData { .. } => LivStatus::DegenerateData,
            Error::Irrelevance { .. } => LivStatus::Irrelevance,
            Error::DegenerateKappa { .. } => LivStatus::DegenerateKappa,
            Error::DomainError(_) => LivStatus::DomainError,
            Error::Infeasible { .. } => LivStatus::Infeasible,
            Error::AllZeroTau { .. } => LivStatus::AllZeroTau,
            Error::TooFewInstruments { .. } => LivStatus::TooFewInstruments,
            Error::NullNotRepairable { .. } => LivStatus::NullNotRepairable,
            Error::TooManyDiscarded { .. } => LivStatus::TooManyDiscarded,
            Error::UnachievableSnr(_) => LivStatus::UnachievableSnr,
            Error::DegenerateDirection(_) => LivStatus::DegenerateDirection,
            Error::RankDeficient => LivStatus::RankDeficient,
            Error::ChainDiverged { .. } => LivStatus::ChainDiverged,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => LivStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Runs `f`, recording failures and containing panics.
fn guard(f: impl FnOnce() -> Result<(), LivStatus>) -> LivStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LivStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            LivStatus::Panic
        }
    }
}

fn fail(e: Error) -> LivStatus {
    let status = LivStatus::from(&e);
    set_error(e.to_string());
    status
}

fn null(name: &str) -> LivStatus {
    set_error(format!("`{name}` is null"));
    LivStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, LivStatus> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], LivStatus> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn liv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn liv_status_string(status: LivStatus) -> *const c_char {
    let s: &'static CStr = match status {
        LivStatus::Ok => c"ok",
        LivStatus::NullPointer => c"null pointer argument",
        LivStatus::InvalidInput => c"invalid input",
        LivStatus::NotPositiveDefinite => c"covariance is not positive definite",
        LivStatus::DegenerateData => c"degenerate data",
        LivStatus::Irrelevance => c"instruments are irrelevant",
        LivStatus::DegenerateKappa => c"degenerate conditional moments",
        LivStatus::DomainError => c"domain error",
        LivStatus::Infeasible => c"leakage budget is infeasible",
        LivStatus::AllZeroTau => c"all thresholds zero and inconsistent",
        LivStatus::TooFewInstruments => c"too few instruments",
        LivStatus::NullNotRepairable => c"null covariance not repairable",
        LivStatus::TooManyDiscarded => c"too many bootstrap replicates discarded",
        LivStatus::UnachievableSnr => c"requested SNR not achievable",
        LivStatus::DegenerateDirection => c"degenerate instrument directions",
        LivStatus::RankDeficient => c"rank deficient design",
        LivStatus::ChainDiverged => c"MCMC chain diverged",
        LivStatus::Io => c"I/O or parse error",
        LivStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

#[no_mangle]
pub extern "C" fn liv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque dataset handle.
pub struct LivDataset(Dataset);

/// Opaque covariance handle.
pub struct LivCovariance(CovarianceBlocks);

/// Copies an `n × (d_z + 2)` row-major matrix into a new dataset.
///
/// # Safety
/// `values` must point to `n * (d_z + 2)` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liv_dataset_from_rows(values: *const f64, n: usize, d_z: usize, out: *mut *mut LivDataset) -> LivStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let k = d_z.checked_add(2).ok_or_else(|| fail(Error::invalid("d_z overflows")))?;
        let len = n.checked_mul(k).ok_or_else(|| fail(Error::invalid("n * (d_z + 2) overflows")))?;
        let v = slice(values, len, "values")?;
        let data = Dataset::from_layout(DMatrix::from_row_slice(n, k, v)).map_err(fail)?;
        *out = Box::into_raw(Box::new(LivDataset(data)));
        Ok(())
    })
}

/// Reads a CSV with header `X,Y,Z1,...,Zd`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liv_dataset_read_csv(path: *const c_char, out: *mut *mut LivDataset) -> LivStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| fail(Error::invalid("path is not UTF-8")))?;
        let data = Dataset::read_csv(path).map_err(fail)?;
        *out = Box::into_raw(Box::new(LivDataset(data)));
        Ok(())
    })
}

/// # Safety
/// `data` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn liv_dataset_free(data: *mut LivDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Number of rows, or 0 for NULL.
///
/// # Safety
/// `data` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn liv_dataset_n(data: *const LivDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n())
}

/// Number of instruments, or 0 for NULL.
///
/// # Safety
/// `data` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn liv_dataset_d_z(data: *const LivDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.d_z())
}

/// Sample covariance of a dataset (`ridge` is added to the diagonal).
///
/// # Safety
/// `data` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liv_covariance_from_dataset(
    data: *const LivDataset,
    ridge: f64,
    unbiased: bool,
    out: *mut *mut LivCovariance,
) -> LivStatus {
    guard(|| {
        let data = deref(data, "data")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let blocks = sample_covariance(&data.0, &CovarianceOptions { ridge, unbiased }).map_err(fail)?;
        *out = Box::into_raw(Box::new(LivCovariance(blocks)));
        Ok(())
    })
}

/// Wraps a `size × size` row-major covariance of `[Z1..Zd, X, Y]`; it must be symmetric positive definite.
///
/// # Safety
/// `matrix` must point to `size * size` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liv_covariance_from_matrix(matrix: *const f64, size: usize, out: *mut *mut LivCovariance) -> LivStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if size < 3 {
            return Err(fail(Error::invalid(format!("covariance needs at least 3 rows, got {size}"))));
        }
        let len = size.checked_mul(size).ok_or_else(|| fail(Error::invalid("size overflows")))?;
        let m = DMatrix::from_row_slice(size, size, slice(matrix, len, "matrix")?);
        let blocks = CovarianceBlocks::from_matrix(&m).map_err(fail)?;
        *out = Box::into_raw(Box::new(LivCovariance(blocks)));
        Ok(())
    })
}

/// # Safety
/// `cov` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn liv_covariance_free(cov: *mut LivCovariance) {
    if !cov.is_null() {
        drop(Box::from_raw(cov));
    }
}

/// Sharp bounds and the minimum-leakage point they surround.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LivBounds {
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    /// Midpoint of the minimising set (a single point unless p ∈ {1, ∞}).
    pub theta_check: f64,
    pub rho_check: f64,
    pub tau_check: f64,
    pub tau: f64,
    pub boundary_clipped: bool,
}

impl From<&AteBounds> for LivBounds {
    fn from(b: &AteBounds) -> Self {
        let g = &b.geometry;
        Self {
            theta_minus: b.theta_minus,
            theta_plus: b.theta_plus,
            rho_minus: b.rho_minus,
            rho_plus: b.rho_plus,
            theta_check: 0.5 * (g.theta_check[0] + g.theta_check[1]),
            rho_check: 0.5 * (g.rho_check[0] + g.rho_check[1]),
            tau_check: g.tau_check,
            tau: b.tau_used,
            boundary_clipped: b.boundary_clipped,
        }
    }
}

fn norm_order(p: f64) -> Result<NormOrder, LivStatus> {
    NormOrder::new(p).map_err(fail)
}

/// Bounds under ‖γ‖_p ≤ tau. Pass `p = INFINITY` for the max norm.
///
/// # Safety
/// `cov` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liv_bounds_scalar(cov: *const LivCovariance, p: f64, tau: f64, out: *mut LivBounds) -> LivStatus {
    guard(|| {
        let cov = deref(cov, "cov")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let b = ate_bounds_scalar(&cov.0, norm_order(p)?, tau).map_err(fail)?;
        *out = LivBounds::from(&b);
        Ok(())
    })
}

/// Smallest feasible budget for ‖γ‖_p.
///
/// # Safety
/// `cov` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liv_min_leakage(cov: *const LivCovariance, p: f64, out: *mut f64) -> LivStatus {
    guard(|| {
        let cov = deref(cov, "cov")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = leakage_geometry(&cov.0, norm_order(p)?).map_err(fail)?.tau_check;
        Ok(())
    })
}

/// Bounds under |γ_j| ≤ tau[j]; zero entries mark valid instruments.
///
/// # Safety
/// `cov` must be a live handle, `tau` must point to `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liv_bounds_vector(cov: *const LivCovariance, tau: *const f64, len: usize, out: *mut LivBounds) -> LivStatus {
    guard(|| {
        let cov = deref(cov, "cov")?;
        let tau = slice(tau, len, "tau")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let b = ate_bounds_vector(&cov.0, tau).map_err(fail)?;
        *out = LivBounds::from(&b);
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LivTestResult {
    pub psi_hat: f64,
    pub p_value: f64,
    pub replicates: usize,
    pub theta_2sls: f64,
}

/// Monte Carlo exclusion test with `replicates` ≥ 99 null draws.
///
/// # Safety
/// `data` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liv_exclusion_test(data: *const LivDataset, replicates: usize, seed: u64, out: *mut LivTestResult) -> LivStatus {
    guard(|| {
        let data = deref(data, "data")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = exclusion_test(&data.0, replicates, seed).map_err(fail)?;
        *out = LivTestResult { psi_hat: r.psi_hat, p_value: r.p_value, replicates: r.b, theta_2sls: r.theta_2sls };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LivBootstrapMethod {
    Empirical = 0,
    Kernel = 1,
    Gaussian = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LivBootstrapResult {
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub theta_minus_ci: [f64; 2],
    pub theta_plus_ci: [f64; 2],
    pub n_discarded: usize,
    pub replicates: usize,
}

/// Bootstrap intervals for both bounds under ‖γ‖_p ≤ tau.
///
/// # Safety
/// `data` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liv_bootstrap_bounds(
    data: *const LivDataset,
    p: f64,
    tau: f64,
    replicates: usize,
    alpha: f64,
    method: LivBootstrapMethod,
    seed: u64,
    out: *mut LivBootstrapResult,
) -> LivStatus {
    guard(|| {
        let data = deref(data, "data")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let method = match method {
            LivBootstrapMethod::Empirical => BootstrapMethod::Empirical,
            LivBootstrapMethod::Kernel => BootstrapMethod::Kernel,
            LivBootstrapMethod::Gaussian => BootstrapMethod::Gaussian,
        };
        let spec = TauSpec::scalar(norm_order(p)?, tau);
        let r = bootstrap_bounds(&data.0, &spec, replicates, alpha, method, seed).map_err(fail)?;
        *out = LivBootstrapResult {
            theta_minus: r.estimate.theta_minus,
            theta_plus: r.estimate.theta_plus,
            theta_minus_ci: r.theta_minus.ci,
            theta_plus_ci: r.theta_plus.ci,
            n_discarded: r.theta_minus.n_discarded,
            replicates,
        };
        Ok(())
    })
}

/// Simulation settings; start from [`liv_sim_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LivSimConfig {
    pub d_z: usize,
    /// Toeplitz instrument covariance with lag-one correlation `autocorr` (else diagonal).
    pub toeplitz: bool,
    pub autocorr: f64,
    pub rho: f64,
    pub snr_x: f64,
    pub snr_y: f64,
    pub theta_star: f64,
    pub sigma_yy: f64,
    pub gamma_sparsity: f64,
    pub seed: u64,
}

#[no_mangle]
pub extern "C" fn liv_sim_config_default() -> LivSimConfig {
    let c = SimConfig::default();
    LivSimConfig {
        d_z: c.d_z,
        toeplitz: false,
        autocorr: 0.5,
        rho: c.rho,
        snr_x: c.snr_x,
        snr_y: c.snr_y,
        theta_star: c.theta_star,
        sigma_yy: c.sigma_yy,
        gamma_sparsity: c.gamma_sparsity,
        seed: c.seed,
    }
}

/// Scalar summary of the simulated ground truth.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LivGroundTruth {
    pub theta_star: f64,
    pub rho: f64,
    pub eta_x: f64,
    pub eta_y: f64,
    pub tau_star_2: f64,
    pub tau_check_2: f64,
}

/// Draws `n` rows; `truth` may be NULL.
///
/// # Safety
/// `config` must be readable, `out` writable and `truth` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn liv_simulate(
    config: *const LivSimConfig,
    n: usize,
    out: *mut *mut LivDataset,
    truth: *mut LivGroundTruth,
) -> LivStatus {
    guard(|| {
        let c = deref(config, "config")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = SimConfig {
            d_z: c.d_z,
            sigma_zz_kind: if c.toeplitz { SigmaZzKind::Toeplitz { autocorr: c.autocorr } } else { SigmaZzKind::Diagonal },
            rho: c.rho,
            snr_x: c.snr_x,
            snr_y: c.snr_y,
            theta_star: c.theta_star,
            sigma_yy: c.sigma_yy,
            gamma_sparsity: c.gamma_sparsity,
            tau_check_target: None,
            seed: c.seed,
        };
        let (data, t) = generate_dataset(&cfg, n).map_err(fail)?;
        if let Some(truth) = truth.as_mut() {
            *truth = LivGroundTruth {
                theta_star: t.theta_star,
                rho: t.rho,
                eta_x: t.eta_x,
                eta_y: t.eta_y,
                tau_star_2: t.tau_star_2,
                tau_check_2: t.tau_check_2,
            };
        }
        *out = Box::into_raw(Box::new(LivDataset(data)));
        Ok(())
    })
}
