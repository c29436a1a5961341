use super::{
    ate_from_rho_unchecked, min_leakage, rho_from_ate, AteBounds, LeakageGeometry, NormOrder, FEAS_TOL, RHO_CLIP,
};
use crate::covariance::{compute_kappas, compute_regression_vectors, CovarianceBlocks, KappaTriple, RegressionVectors};
use crate::error::{Error, Result};

/// Which route computes the extreme roots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundsMethod {
    /// Closed form for p = 2, bisection otherwise.
    #[default]
    Auto,
    /// Quadratic-formula bounds; only valid for p = 2.
    ClosedForm,
    /// Bisection on the sublevel indicator of h_p in ρ-space.
    Bisection,
}

/// Conditional moments, regression vectors and the minimum-leakage point.
pub fn leakage_geometry(blocks: &CovarianceBlocks, p: NormOrder) -> Result<LeakageGeometry> {
    let kappas = compute_kappas(blocks)?;
    let vectors = compute_regression_vectors(blocks)?;
    geometry_from_parts(kappas, vectors, p)
}

pub(crate) fn geometry_from_parts(kappas: KappaTriple, vectors: RegressionVectors, p: NormOrder) -> Result<LeakageGeometry> {
    kappas.validate()?;
    let min = min_leakage(&vectors, p)?;
    let [t_lo, t_hi] = min.theta_check;
    // f is decreasing, so the interval ends swap.
    let rho_check = [rho_from_ate(t_hi, &kappas)?, rho_from_ate(t_lo, &kappas)?];
    Ok(LeakageGeometry { kappas, vectors, p, theta_check: min.theta_check, rho_check, tau_check: min.tau_check })
}

/// Sharp ATE bounds under ‖γ‖_p ≤ tau.
pub fn ate_bounds_scalar(blocks: &CovarianceBlocks, p: NormOrder, tau: f64) -> Result<AteBounds> {
    ate_bounds_scalar_with(blocks, p, tau, BoundsMethod::Auto)
}

pub fn ate_bounds_scalar_with(blocks: &CovarianceBlocks, p: NormOrder, tau: f64, method: BoundsMethod) -> Result<AteBounds> {
    let geometry = leakage_geometry(blocks, p)?;
    bounds_from_geometry(geometry, tau, method)
}

/// Bounds for a precomputed geometry.
pub fn bounds_from_geometry(geometry: LeakageGeometry, tau: f64, method: BoundsMethod) -> Result<AteBounds> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::invalid(format!("tau must be finite and nonnegative, got {tau}")));
    }
    let tau_check = geometry.tau_check;
    let tol = FEAS_TOL * tau_check.max(1.0);
    if tau < tau_check - tol {
        return Err(Error::Infeasible { tau, tau_check });
    }
    if tau <= tau_check + tol {
        return Ok(collapsed(geometry, tau));
    }
    let method = match method {
        BoundsMethod::Auto if geometry.p.is_two() => BoundsMethod::ClosedForm,
        BoundsMethod::Auto => BoundsMethod::Bisection,
        m => m,
    };
    match method {
        BoundsMethod::ClosedForm => closed_form(geometry, tau),
        _ => bisection(geometry, tau),
    }
}

fn collapsed(geometry: LeakageGeometry, tau: f64) -> AteBounds {
    AteBounds {
        theta_minus: geometry.theta_check[0],
        theta_plus: geometry.theta_check[1],
        rho_minus: geometry.rho_check[0],
        rho_plus: geometry.rho_check[1],
        geometry,
        tau_used: tau,
        boundary_clipped: false,
    }
}

/// θ̌₂ ± (β·β)⁻¹ √((β·β)(τ² − α·α) + (α·β)²).
///
/// The radicand equals (β·β)(τ − τ̌₂)(τ + τ̌₂), which is the form evaluated here.
fn closed_form(geometry: LeakageGeometry, tau: f64) -> Result<AteBounds> {
    if !geometry.p.is_two() {
        return Err(Error::invalid("closed-form bounds require p = 2"));
    }
    let bb = geometry.vectors.beta.norm_squared();
    let center = geometry.theta_check[0];
    let tc = geometry.tau_check;
    let radicand = (bb * (tau - tc) * (tau + tc)).max(0.0);
    let half_width = radicand.sqrt() / bb;
    let theta_minus = center - half_width;
    let theta_plus = center + half_width;
    let rho_minus = rho_from_ate(theta_plus, &geometry.kappas)?;
    let rho_plus = rho_from_ate(theta_minus, &geometry.kappas)?;
    Ok(AteBounds { theta_minus, theta_plus, rho_minus, rho_plus, geometry, tau_used: tau, boundary_clipped: false })
}

/// Leftmost and rightmost ρ with h_p(ρ) ≤ τ, found by bisecting the sublevel
/// indicator from the clipped domain ends towards the minimiser interval.
fn bisection(geometry: LeakageGeometry, tau: f64) -> Result<AteBounds> {
    let k = geometry.kappas;
    let sqrt_disc = k.discriminant().sqrt();
    let feasible = |rho: f64| {
        let theta = ate_from_rho_unchecked(rho, k.kappa_xx, k.kappa_xy, sqrt_disc);
        geometry.leakage(theta) <= tau
    };
    let lower_end = -1.0 + RHO_CLIP;
    let upper_end = 1.0 - RHO_CLIP;
    let mut clipped = false;

    let rho_minus = if feasible(lower_end) {
        clipped = true;
        lower_end
    } else {
        // Invariant: infeasible at `out`, feasible at `inn`.
        boundary_search(lower_end, geometry.rho_check[0], &feasible)
    };
    let rho_plus = if feasible(upper_end) {
        clipped = true;
        upper_end
    } else {
        boundary_search(upper_end, geometry.rho_check[1], &feasible)
    };

    let theta_plus = ate_from_rho_unchecked(rho_minus, k.kappa_xx, k.kappa_xy, sqrt_disc);
    let theta_minus = ate_from_rho_unchecked(rho_plus, k.kappa_xx, k.kappa_xy, sqrt_disc);
    Ok(AteBounds { theta_minus, theta_plus, rho_minus, rho_plus, geometry, tau_used: tau, boundary_clipped: clipped })
}

/// Bisects until `out` and `inn` are adjacent floats; returns the feasible end.
fn boundary_search(mut out: f64, mut inn: f64, feasible: &impl Fn(f64) -> bool) -> f64 {
    for _ in 0..2100 {
        let mid = 0.5 * (out + inn);
        if mid == out || mid == inn {
            break;
        }
        if feasible(mid) {
            inn = mid;
        } else {
            out = mid;
        }
    }
    inn
}
