//! Reference estimators: backdoor regression and a full-likelihood Bayesian
//! model with a bounded-norm leakage prior.

mod bayes;
mod mcmc;

pub use bayes::{
    log_likelihood, model_covariance, run_chains, run_mh, suffstat, BayesConfig, BayesPosterior, BayesPriors, BayesState,
    GammaEncoding, StepSizes,
};
pub use mcmc::{run_chain, ChainOutput, ChainSettings};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::covariance::{raw_covariance, Dataset, PD_TOL};
use crate::error::{Error, Result};

/// Coefficient on X from regressing Y on (X, Z) with an intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

pub fn backdoor_ols(data: &Dataset) -> Result<OlsEstimate> {
    let cov = raw_covariance(data.matrix(), None, false)?;
    backdoor_from_covariance(&cov, data.n())
}

/// Backdoor estimate from a `[Z.., X, Y]` MLE covariance of `n` rows; `Z` may be empty.
///
/// By partialling out Z the X coefficient is κ_xy/κ_xx, with the usual
/// homoskedastic standard error on n − d_z − 2 residual degrees of freedom.
pub fn backdoor_from_covariance(cov: &DMatrix<f64>, n: usize) -> Result<OlsEstimate> {
    let k = cov.nrows();
    if k < 2 || cov.ncols() != k {
        return Err(Error::invalid("covariance must be square with X and Y columns"));
    }
    let d = k - 2;
    let (kxx, kxy, kyy) = if d == 0 {
        (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)])
    } else {
        let zz = cov.view((0, 0), (d, d)).into_owned();
        let zxy = cov.view((0, d), (d, 2)).into_owned();
        let chol = nalgebra::Cholesky::new(zz.clone()).ok_or(Error::RankDeficient)?;
        let solved = chol.solve(&zxy);
        let adj = zxy.transpose() * solved;
        (cov[(d, d)] - adj[(0, 0)], cov[(d, d + 1)] - adj[(0, 1)], cov[(d + 1, d + 1)] - adj[(1, 1)])
    };
    if !(kxx > PD_TOL * cov[(d, d)].abs()) {
        return Err(Error::RankDeficient);
    }
    let estimate = kxy / kxx;
    let dof = n as f64 - d as f64 - 2.0;
    let std_error = if dof > 0.0 {
        let resid = (kyy - kxy * kxy / kxx).max(0.0) * n as f64 / dof;
        (resid / (n as f64 * kxx)).sqrt()
    } else {
        f64::NAN
    };
    Ok(OlsEstimate { estimate, std_error })
}
