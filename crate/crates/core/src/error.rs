use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("covariance matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e}, threshold {threshold:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64, threshold: f64 },

    #[error("degenerate data: column `{column}` has zero variance")]
    DegenerateData { column: String },

    /// The instruments carry no signal for the treatment (‖β‖ ≈ 0).
    #[error("instruments are irrelevant for the treatment (‖beta‖ = {norm:.3e})")]
    Irrelevance { norm: f64 },

    /// κ_xx·κ_yy = κ_xy², so the confounding correlation is pinned to ±1.
    #[error("degenerate conditional moments: rho is pinned to {sign:+}1")]
    DegenerateKappa { sign: i8 },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("infeasible leakage budget: tau = {tau} is below the minimum leakage {tau_check}")]
    Infeasible { tau: f64, tau_check: f64 },

    #[error("all thresholds are zero and the exclusion constraints are inconsistent (residual leakage {residual:.3e})")]
    AllZeroTau { residual: f64 },

    #[error("at least two instruments are required, got {d_z}")]
    TooFewInstruments { d_z: usize },

    #[error("null covariance needs a PSD repair of relative size {relative_change:.3e} (limit {limit:.1e})")]
    NullNotRepairable { relative_change: f64, limit: f64 },

    #[error("{discarded} of {total} bootstrap replicates were infeasible")]
    TooManyDiscarded { discarded: usize, total: usize },

    #[error("requested SNR is not achievable: {0}")]
    UnachievableSnr(String),

    #[error("instrument directions are degenerate: {0}")]
    DegenerateDirection(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("MCMC chain diverged: acceptance rate {rate:.4} in window ending at iteration {iteration}")]
    ChainDiverged { rate: f64, iteration: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. } | Error::AllZeroTau { .. })
    }
}
