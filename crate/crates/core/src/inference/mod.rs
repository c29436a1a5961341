//! Finite-sample inference: a Monte Carlo test of the exclusion restriction
//! and bootstrap confidence intervals for the bound endpoints.

mod bootstrap;
mod exclusion;

pub use bootstrap::{
    bootstrap_bounds, quantile_indices, BootstrapBounds, BootstrapMethod, BootstrapResult, BoundSide,
    MIN_BOOTSTRAP_REPLICATES,
};
pub use exclusion::{
    exclusion_test, exclusion_test_with, null_covariance, ExclusionTestResult, GaussianSampler, NullCovariance,
    NullSampler, StudentTSampler, MIN_REPLICATES, REPAIR_TOL,
};

use crate::covariance::{CovarianceBlocks, REL_TOL};
use crate::error::{Error, Result};

/// ψ = det(ΛᵀΛ) for Λ = [Σ_zx, Σ_zy], i.e. ‖Σ_zx‖²‖Σ_zy‖² − (Σ_zx·Σ_zy)².
///
/// Evaluated as the sum of squared 2×2 minors (Lagrange's identity), which is
/// nonnegative by construction and free of cancellation.
pub fn tetrad_statistic(blocks: &CovarianceBlocks) -> Result<f64> {
    let d = blocks.d_z();
    if d < 2 {
        return Err(Error::TooFewInstruments { d_z: d });
    }
    Ok(tetrad_from_columns(blocks.sigma_zx.as_slice(), blocks.sigma_zy.as_slice()))
}

pub(crate) fn tetrad_from_columns(zx: &[f64], zy: &[f64]) -> f64 {
    let mut psi = 0.0;
    for j in 0..zx.len() {
        for k in j + 1..zx.len() {
            let minor = zx[j] * zy[k] - zx[k] * zy[j];
            psi += minor * minor;
        }
    }
    psi
}

/// (Σ_zx·Σ_zy)/(Σ_zx·Σ_zx).
pub fn two_stage_least_squares(blocks: &CovarianceBlocks) -> Result<f64> {
    let zx = &blocks.sigma_zx;
    let scale = (blocks.sigma_xx * blocks.sigma_zz.trace() / blocks.d_z() as f64).sqrt();
    let norm = zx.norm();
    if !(norm > REL_TOL * scale) {
        return Err(Error::Irrelevance { norm });
    }
    Ok(zx.dot(&blocks.sigma_zy) / zx.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{compute_regression_vectors, RegressionVectors};
    use nalgebra::{DMatrix, DVector};

    fn blocks(zx: &[f64], zy: &[f64]) -> CovarianceBlocks {
        let d = zx.len();
        CovarianceBlocks {
            sigma_zz: DMatrix::identity(d, d),
            sigma_zx: DVector::from_column_slice(zx),
            sigma_zy: DVector::from_column_slice(zy),
            sigma_xx: 4.0,
            sigma_xy: 1.0,
            sigma_yy: 4.0,
        }
    }

    #[test]
    fn tetrad_examples() {
        assert_eq!(tetrad_statistic(&blocks(&[1.0, 0.0], &[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(tetrad_statistic(&blocks(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0])).unwrap(), 0.0);
        assert!(matches!(tetrad_statistic(&blocks(&[1.0], &[1.0])), Err(Error::TooFewInstruments { d_z: 1 })));
    }

    #[test]
    fn tetrad_matches_gram_determinant_and_is_rotation_invariant() {
        let zx = [0.3, -1.2, 0.7];
        let zy = [1.1, 0.4, -0.5];
        let gram = |a: &[f64], b: &[f64]| {
            let (a, b) = (DVector::from_column_slice(a), DVector::from_column_slice(b));
            a.norm_squared() * b.norm_squared() - a.dot(&b).powi(2)
        };
        let psi = tetrad_statistic(&blocks(&zx, &zy)).unwrap();
        assert!((psi - gram(&zx, &zy)).abs() < 1e-12);

        let (c, s) = (0.6f64, 0.8f64);
        let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let rx = &rot * DVector::from_column_slice(&zx);
        let ry = &rot * DVector::from_column_slice(&zy);
        let rotated = tetrad_statistic(&blocks(rx.as_slice(), ry.as_slice())).unwrap();
        assert!((psi - rotated).abs() < 1e-12);
    }

    #[test]
    fn two_sls_examples() {
        assert!((two_stage_least_squares(&blocks(&[0.5, -0.2], &[1.0, -0.4])).unwrap() - 2.0).abs() < 1e-15);
        let b = blocks(&[0.5, -0.2, 0.1], &[0.3, 0.7, -0.1]);
        let v: RegressionVectors = compute_regression_vectors(&b).unwrap();
        let oracle = v.beta.dot(&v.alpha) / v.beta.norm_squared();
        assert!((two_stage_least_squares(&b).unwrap() - oracle).abs() < 1e-14);
        assert!(matches!(two_stage_least_squares(&blocks(&[0.0, 0.0], &[1.0, 0.0])), Err(Error::Irrelevance { .. })));
    }
}
