//! Thin helpers over nalgebra for the symmetric positive-definite solves used throughout.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| {
        let min_eigenvalue = SymmetricEigen::new(m.clone()).eigenvalues.min();
        Error::NotPositiveDefinite { min_eigenvalue, threshold: 0.0 }
    })
}

/// Lower Cholesky factor.
pub(crate) fn cholesky_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(cholesky(m)?.l())
}

/// Projects a symmetric matrix onto the PSD cone by clipping negative
/// eigenvalues at zero. Returns the repaired matrix and the relative
/// Frobenius change.
pub(crate) fn clip_to_psd(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.min() >= 0.0 {
        return (sym, 0.0);
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let q = &eig.eigenvectors;
    let repaired = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    let repaired = (&repaired + repaired.transpose()) * 0.5;
    let change = (&repaired - m).norm() / m.norm().max(f64::MIN_POSITIVE);
    (repaired, change)
}

/// Factor `L` with `L Lᵀ = m` for a PSD matrix (possibly singular), via the
/// eigendecomposition.
pub(crate) fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = Cholesky::new(m.clone()) {
        return ch.l();
    }
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}
