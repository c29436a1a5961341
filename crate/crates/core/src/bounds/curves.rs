use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{leakage_geometry, NormOrder};
use crate::covariance::CovarianceBlocks;
use crate::error::{Error, Result};

/// One row of the ρ–θ–leakage curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rho: f64,
    pub theta: f64,
    pub leakage: f64,
}

/// `size` evenly spaced interior points of (−1, 1).
pub fn rho_grid(size: usize) -> Vec<f64> {
    let step = 2.0 / (size as f64 + 1.0);
    (1..=size).map(|i| -1.0 + i as f64 * step).collect()
}

/// (ρ, f(ρ), h_p(ρ)) for each grid point.
pub fn curve_samples(blocks: &CovarianceBlocks, p: NormOrder, rho_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    if let Some(bad) = rho_grid.iter().find(|r| !(r.abs() < 1.0)) {
        return Err(Error::DomainError(format!("grid point {bad} is outside (-1, 1)")));
    }
    let geometry = leakage_geometry(blocks, p)?;
    Ok(rho_grid
        .iter()
        .map(|&rho| {
            let theta = geometry.theta(rho);
            CurvePoint { rho, theta, leakage: geometry.leakage(theta) }
        })
        .collect())
}

/// CSV with header `rho,theta,leakage`.
pub fn write_curves_csv<W: Write>(points: &[CurvePoint], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for p in points {
        wtr.serialize(p)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{leakage_norm, min_leakage};
    use crate::covariance::{compute_kappas, compute_regression_vectors};
    use nalgebra::{DMatrix, DVector};

    fn blocks() -> CovarianceBlocks {
        CovarianceBlocks {
            sigma_zz: DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 1.0]),
            sigma_zx: DVector::from_vec(vec![0.5, -0.2, 0.3]),
            sigma_zy: DVector::from_vec(vec![0.4, 0.1, 0.2]),
            sigma_xx: 1.5,
            sigma_xy: 0.6,
            sigma_yy: 2.0,
        }
    }

    #[test]
    fn single_point_at_zero() {
        let b = blocks();
        let pts = curve_samples(&b, NormOrder::Finite(2.0), &[0.0]).unwrap();
        let k = compute_kappas(&b).unwrap();
        let v = compute_regression_vectors(&b).unwrap();
        let theta = k.kappa_xy / k.kappa_xx;
        assert_eq!(pts.len(), 1);
        assert!((pts[0].theta - theta).abs() < 1e-15);
        assert!((pts[0].leakage - leakage_norm(theta, &v, NormOrder::Finite(2.0))).abs() < 1e-15);
    }

    #[test]
    fn theta_column_strictly_decreasing_and_minimum_near_rho_check() {
        let b = blocks();
        let grid = rho_grid(2001);
        let pts = curve_samples(&b, NormOrder::Finite(2.0), &grid).unwrap();
        assert!(pts.windows(2).all(|w| w[1].theta < w[0].theta));
        let argmin = pts.iter().min_by(|a, b| a.leakage.total_cmp(&b.leakage)).unwrap().rho;
        let v = compute_regression_vectors(&b).unwrap();
        let k = compute_kappas(&b).unwrap();
        let m = min_leakage(&v, NormOrder::Finite(2.0)).unwrap();
        let rho_check = crate::bounds::rho_from_ate(m.theta_check[0], &k).unwrap();
        let step = grid[1] - grid[0];
        assert!((argmin - rho_check).abs() <= step, "{argmin} vs {rho_check}");
    }

    #[test]
    fn rejects_boundary_points() {
        assert!(curve_samples(&blocks(), NormOrder::Finite(2.0), &[0.0, 1.0]).is_err());
    }

    #[test]
    fn csv_header() {
        let mut out = Vec::new();
        write_curves_csv(&[CurvePoint { rho: 0.0, theta: 1.0, leakage: 2.0 }], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "rho,theta,leakage\n0.0,1.0,2.0\n");
    }
}
