use nalgebra::DMatrix;

use super::scalar::geometry_from_parts;
use super::{bounds_from_geometry, AteBounds, BoundsMethod, LeakageGeometry, NormOrder};
use crate::covariance::{compute_kappas, compute_regression_vectors, CovarianceBlocks};
use crate::error::{Error, Result};

/// Relative residual ‖α − θ̌₂β‖/‖α‖ below which all-zero thresholds are
/// considered consistent with exact exclusion.
const ALL_ZERO_TOL: f64 = 1e-8;

/// Covariance rescaled so that per-instrument thresholds become a unit
/// L_∞ budget.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTransform {
    pub blocks: CovarianceBlocks,
    /// Instruments with τ_j = 0 (their rows/columns are left unscaled).
    pub zero_set: Vec<usize>,
    /// Instruments with τ_j > 0.
    pub support: Vec<usize>,
}

/// Σ̃ = T ⊙ Σ with T_ij = 1/(τ⁺_i τ⁺_j), τ⁺ = [τ, 1, 1] in `[Z.., X, Y]` order
/// and zero thresholds replaced by 1.
pub fn transform_vector_tau(blocks: &CovarianceBlocks, tau: &[f64]) -> Result<VectorTransform> {
    let d = blocks.d_z();
    if tau.len() != d {
        return Err(Error::invalid(format!("tau vector has {} entries, expected {d}", tau.len())));
    }
    if let Some(bad) = tau.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::invalid(format!("tau entries must be finite and nonnegative, got {bad}")));
    }
    let mut tau_plus: Vec<f64> = tau.iter().map(|&t| if t == 0.0 { 1.0 } else { t }).collect();
    tau_plus.extend([1.0, 1.0]);
    let full = blocks.to_matrix();
    let scaled = DMatrix::from_fn(d + 2, d + 2, |i, j| full[(i, j)] / (tau_plus[i] * tau_plus[j]));
    let (zero_set, support): (Vec<usize>, Vec<usize>) = (0..d).partition(|&j| tau[j] == 0.0);
    Ok(VectorTransform { blocks: CovarianceBlocks::partition(&scaled)?, zero_set, support })
}

/// Sharp ATE bounds under |γ_j| ≤ τ_j for every instrument.
///
/// Dividing the Z_j row/column by s_j rescales Z_j to Z_j/s_j, which turns γ_j
/// into s_j·γ_j. A unit L_∞ budget on the rescaled weights therefore encodes
/// |γ_j| ≤ τ_j when s_j = 1/τ_j, so the transform is applied with reciprocal
/// thresholds. θ is unchanged (X and Y are not rescaled). Coordinates with
/// τ_j = 0 are dropped from the norm; when every threshold is zero the bounds
/// collapse to the norm-minimising θ, provided α and β are parallel.
pub fn ate_bounds_vector(blocks: &CovarianceBlocks, tau: &[f64]) -> Result<AteBounds> {
    let reciprocal: Vec<f64> = tau.iter().map(|&t| if t > 0.0 { 1.0 / t } else { t }).collect();
    let transform = transform_vector_tau(blocks, &reciprocal)?;
    let kappas = compute_kappas(&transform.blocks)?;
    let vectors = compute_regression_vectors(&transform.blocks)?;

    if transform.support.is_empty() {
        let geometry = geometry_from_parts(kappas, vectors, NormOrder::Finite(2.0))?;
        let scale = geometry.vectors.alpha.norm().max(geometry.vectors.beta.norm() * geometry.theta_check[0].abs());
        let residual = if scale > 0.0 { geometry.tau_check / scale } else { 0.0 };
        if residual > ALL_ZERO_TOL {
            return Err(Error::AllZeroTau { residual });
        }
        let geometry = LeakageGeometry { p: NormOrder::Infinity, tau_check: 0.0, ..geometry };
        return bounds_from_geometry(geometry, 0.0, BoundsMethod::Auto);
    }

    let restricted = vectors.select(&transform.support);
    let geometry = geometry_from_parts(kappas, restricted, NormOrder::Infinity)?;
    bounds_from_geometry(geometry, 1.0, BoundsMethod::Bisection)
}
