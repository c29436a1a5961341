//! Sharp ATE bounds under scalar and vector τ-exclusion.
//!
//! The leakage budget only constrains γ = α − θβ. Since θ is a strictly
//! decreasing function of the confounding correlation ρ, the bounds are found
//! by locating the extreme values of ρ whose implied leakage stays within the
//! budget, then mapping them back to θ.

mod confounding;
mod curves;
mod latent;
mod leakage;
mod scalar;
mod vector;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::covariance::{KappaTriple, RegressionVectors};
use crate::error::{Error, Result};

pub use confounding::{ate_from_rho, rho_from_ate};
pub use curves::{curve_samples, rho_grid, write_curves_csv, CurvePoint};
pub use latent::{structural_covariance, LatentParams};
pub use leakage::{leakage_norm, min_leakage, LeakageMinimum};
pub use scalar::{ate_bounds_scalar, ate_bounds_scalar_with, bounds_from_geometry, leakage_geometry, BoundsMethod};
pub use vector::{ate_bounds_vector, transform_vector_tau, VectorTransform};

pub(crate) use confounding::ate_from_rho_unchecked;
#[allow(unused_imports)]
pub(crate) use confounding::rho_from_ate_unchecked;

/// Tolerance on the τ ≥ τ̌ feasibility check, relative to max(1, τ̌).
pub const FEAS_TOL: f64 = 1e-12;
/// Root brackets stop this far from ρ = ±1.
pub const RHO_CLIP: f64 = 1e-12;

/// Order p ≥ 1 of the L_p norm on the leakage weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormOrder {
    Finite(f64),
    Infinity,
}

impl NormOrder {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(NormOrder::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(NormOrder::Finite(p))
        } else {
            Err(Error::invalid(format!("norm order must be >= 1 or infinity, got {p}")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            NormOrder::Finite(p) => p,
            NormOrder::Infinity => f64::INFINITY,
        }
    }

    /// True for p ∈ (1, ∞), where minimisers are unique.
    pub fn is_strictly_convex(self) -> bool {
        matches!(self, NormOrder::Finite(p) if p > 1.0)
    }

    pub fn is_two(self) -> bool {
        matches!(self, NormOrder::Finite(p) if p == 2.0)
    }
}

impl Default for NormOrder {
    fn default() -> Self {
        NormOrder::Finite(2.0)
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::Finite(p) => write!(f, "{p}"),
            NormOrder::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "max" => Ok(NormOrder::Infinity),
            other => {
                let p: f64 = other.parse().map_err(|_| Error::invalid(format!("cannot parse norm order `{s}`")))?;
                NormOrder::new(p)
            }
        }
    }
}

impl Serialize for NormOrder {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormOrder::Finite(p) => serializer.serialize_f64(*p),
            NormOrder::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormOrder {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(p) => NormOrder::new(p),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Leakage budget on γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum TauSpec {
    /// ‖γ‖_p ≤ tau.
    Scalar { p: NormOrder, tau: f64 },
    /// |γ_j| ≤ tau_j for every instrument; zero entries mark valid instruments.
    Vector { tau: Vec<f64> },
}

impl TauSpec {
    pub fn scalar(p: NormOrder, tau: f64) -> Self {
        TauSpec::Scalar { p, tau }
    }

    pub fn validate(&self, d_z: usize) -> Result<()> {
        match self {
            TauSpec::Scalar { tau, .. } => {
                if !(tau.is_finite() && *tau >= 0.0) {
                    return Err(Error::invalid(format!("tau must be finite and nonnegative, got {tau}")));
                }
            }
            TauSpec::Vector { tau } => {
                if tau.len() != d_z {
                    return Err(Error::invalid(format!("tau vector has {} entries, expected {d_z}", tau.len())));
                }
                if let Some(bad) = tau.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
                    return Err(Error::invalid(format!("tau entries must be finite and nonnegative, got {bad}")));
                }
            }
        }
        Ok(())
    }

    /// Indices of instruments with a zero threshold (empty in scalar mode).
    pub fn zero_set(&self) -> Vec<usize> {
        match self {
            TauSpec::Scalar { .. } => Vec::new(),
            TauSpec::Vector { tau } => tau.iter().enumerate().filter(|(_, &t)| t == 0.0).map(|(j, _)| j).collect(),
        }
    }
}

/// Everything about the leakage curve that does not depend on τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageGeometry {
    pub kappas: KappaTriple,
    pub vectors: RegressionVectors,
    pub p: NormOrder,
    /// Interval of θ values minimising g_p (degenerate for p ∈ (1, ∞)).
    pub theta_check: [f64; 2],
    /// Image of `theta_check` under f⁻¹, ordered.
    pub rho_check: [f64; 2],
    /// Minimum leakage consistent with the covariance.
    pub tau_check: f64,
}

impl LeakageGeometry {
    /// g_p(θ).
    pub fn leakage(&self, theta: f64) -> f64 {
        leakage_norm(theta, &self.vectors, self.p)
    }

    /// f(ρ).
    pub fn theta(&self, rho: f64) -> f64 {
        ate_from_rho_unchecked(rho, self.kappas.kappa_xx, self.kappas.kappa_xy, self.kappas.discriminant().sqrt())
    }

    /// h_p(ρ) = g_p(f(ρ)).
    pub fn leakage_at_rho(&self, rho: f64) -> f64 {
        self.leakage(self.theta(rho))
    }
}

/// Sharp bounds on θ together with the extreme confounding values that attain them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteBounds {
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub geometry: LeakageGeometry,
    pub tau_used: f64,
    /// A root hit the clipped domain end 1 − 1e-12.
    pub boundary_clipped: bool,
}

impl AteBounds {
    pub fn contains(&self, theta: f64) -> bool {
        self.theta_minus <= theta && theta <= self.theta_plus
    }

    pub fn width(&self) -> f64 {
        self.theta_plus - self.theta_minus
    }
}
