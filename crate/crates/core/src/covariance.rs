//! Joint covariance of (Z, X, Y) and the conditional moments derived from it.
//!
//! Every covariance matrix in this crate uses the layout `[Z_1, ..., Z_d, X, Y]`:
//! the instrument block first, then the treatment, then the outcome.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Smallest eigenvalue must exceed this fraction of the largest one.
pub const PD_TOL: f64 = 1e-10;
/// ‖β‖ below this (relative to the scale of X over Z) violates relevance.
pub const REL_TOL: f64 = 1e-10;
/// Slack allowed on κ_xx·κ_yy − κ_xy² before it is treated as a real violation.
pub const CS_TOL: f64 = 1e-12;

/// Observations of instruments, treatment and outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// n × (d_z + 2), columns ordered `[Z.., X, Y]`.
    values: DMatrix<f64>,
    z_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from an `n × d_z` instrument matrix and the treatment/outcome columns.
    pub fn new(z: DMatrix<f64>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = z.nrows();
        let d_z = z.ncols();
        if d_z == 0 {
            return Err(Error::invalid("dataset needs at least one instrument"));
        }
        if x.len() != n || y.len() != n {
            return Err(Error::invalid(format!(
                "column lengths differ: z has {n} rows, x has {}, y has {}",
                x.len(),
                y.len()
            )));
        }
        let mut values = DMatrix::zeros(n, d_z + 2);
        values.view_mut((0, 0), (n, d_z)).copy_from(&z);
        values.set_column(d_z, &DVector::from_vec(x));
        values.set_column(d_z + 1, &DVector::from_vec(y));
        Self::from_layout(values)
    }

    /// Builds a dataset from a matrix already in `[Z.., X, Y]` column order.
    pub fn from_layout(values: DMatrix<f64>) -> Result<Self> {
        let d_z = values.ncols().saturating_sub(2);
        let z_names = (1..=d_z).map(|j| format!("Z{j}")).collect();
        Self::with_names(values, z_names)
    }

    fn with_names(values: DMatrix<f64>, z_names: Vec<String>) -> Result<Self> {
        if values.ncols() < 3 {
            return Err(Error::invalid("dataset needs columns X, Y and at least one instrument"));
        }
        if values.nrows() < 2 {
            return Err(Error::invalid("dataset needs at least two observations"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::invalid(format!("non-finite value at row {row}, column {col}")));
        }
        Ok(Self { values, z_names })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d_z(&self) -> usize {
        self.values.ncols() - 2
    }

    /// Data matrix in `[Z.., X, Y]` column order.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn z_names(&self) -> &[String] {
        &self.z_names
    }

    pub fn x(&self) -> Vec<f64> {
        self.values.column(self.d_z()).iter().copied().collect()
    }

    pub fn y(&self) -> Vec<f64> {
        self.values.column(self.d_z() + 1).iter().copied().collect()
    }

    /// Reads a CSV with header `X,Y,Z1,...,Zd`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 3 {
            return Err(Error::invalid("CSV header must be X,Y,Z1,...,Zd with at least one instrument"));
        }
        if &headers[0] != "X" || &headers[1] != "Y" {
            return Err(Error::invalid(format!(
                "CSV header must start with X,Y; found {},{}",
                &headers[0], &headers[1]
            )));
        }
        let d_z = headers.len() - 2;
        let z_names: Vec<String> = headers.iter().skip(2).map(str::to_owned).collect();
        let mut cells: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != d_z + 2 {
                return Err(Error::invalid(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    record.len(),
                    d_z + 2
                )));
            }
            let parse = |k: usize| -> Result<f64> {
                record[k].parse::<f64>().map_err(|_| {
                    Error::invalid(format!("row {}, column {}: `{}` is not numeric", i + 1, &headers[k], &record[k]))
                })
            };
            for k in 2..d_z + 2 {
                cells.push(parse(k)?);
            }
            cells.push(parse(0)?);
            cells.push(parse(1)?);
            n += 1;
        }
        let values = DMatrix::from_row_slice(n, d_z + 2, &cells);
        Self::with_names(values, z_names)
    }

    /// Writes the dataset with header `X,Y,Z1,...,Zd`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let d = self.d_z();
        let mut header = vec!["X".to_owned(), "Y".to_owned()];
        header.extend(self.z_names.iter().cloned());
        wtr.write_record(&header)?;
        let mut row = Vec::with_capacity(d + 2);
        for i in 0..self.n() {
            row.clear();
            row.push(format_value(self.values[(i, d)]));
            row.push(format_value(self.values[(i, d + 1)]));
            for j in 0..d {
                row.push(format_value(self.values[(i, j)]));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn format_value(v: f64) -> String {
    // Shortest representation that round-trips.
    format!("{v}")
}

/// Partitioned covariance of (Z, X, Y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceBlocks {
    pub sigma_zz: DMatrix<f64>,
    pub sigma_zx: DVector<f64>,
    pub sigma_zy: DVector<f64>,
    pub sigma_xx: f64,
    pub sigma_xy: f64,
    pub sigma_yy: f64,
}

impl CovarianceBlocks {
    /// Partitions a full `[Z.., X, Y]` covariance matrix without validating it.
    pub fn partition(full: &DMatrix<f64>) -> Result<Self> {
        let k = full.nrows();
        if k != full.ncols() || k < 3 {
            return Err(Error::invalid(format!(
                "covariance must be square with at least 3 rows, got {}x{}",
                full.nrows(),
                full.ncols()
            )));
        }
        let d = k - 2;
        Ok(Self {
            sigma_zz: full.view((0, 0), (d, d)).into_owned(),
            sigma_zx: full.view((0, d), (d, 1)).column(0).into_owned(),
            sigma_zy: full.view((0, d + 1), (d, 1)).column(0).into_owned(),
            sigma_xx: full[(d, d)],
            sigma_xy: full[(d, d + 1)],
            sigma_yy: full[(d + 1, d + 1)],
        })
    }

    /// Partitions and validates (symmetry, positive definiteness).
    pub fn from_matrix(full: &DMatrix<f64>) -> Result<Self> {
        if full.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariance contains non-finite entries"));
        }
        let scale = full.amax().max(f64::MIN_POSITIVE);
        let asym = (full - full.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::invalid(format!("covariance is not symmetric (max asymmetry {asym:.3e})")));
        }
        let blocks = Self::partition(full)?;
        blocks.validate()?;
        Ok(blocks)
    }

    pub fn d_z(&self) -> usize {
        self.sigma_zx.len()
    }

    /// Reassembles the `(d_z + 2)²` matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let d = self.d_z();
        let mut m = DMatrix::zeros(d + 2, d + 2);
        m.view_mut((0, 0), (d, d)).copy_from(&self.sigma_zz);
        for j in 0..d {
            m[(j, d)] = self.sigma_zx[j];
            m[(d, j)] = self.sigma_zx[j];
            m[(j, d + 1)] = self.sigma_zy[j];
            m[(d + 1, j)] = self.sigma_zy[j];
        }
        m[(d, d)] = self.sigma_xx;
        m[(d, d + 1)] = self.sigma_xy;
        m[(d + 1, d)] = self.sigma_xy;
        m[(d + 1, d + 1)] = self.sigma_yy;
        m
    }

    /// Checks that the assembled matrix and the Z block are positive definite.
    pub fn validate(&self) -> Result<()> {
        check_positive_definite(&self.to_matrix())?;
        check_positive_definite(&self.sigma_zz)
    }

    /// Reads a `(d_z + 2)²` covariance CSV in `[Z.., X, Y]` order. A non-numeric
    /// first row is treated as a header and skipped.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(r) => rows.push(r),
                Err(_) if i == 0 => continue,
                Err(_) => return Err(Error::invalid(format!("covariance row {} is not numeric", i + 1))),
            }
        }
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("covariance CSV must be a square matrix"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_matrix(&DMatrix::from_row_slice(k, k, &flat))
    }
}

fn check_positive_definite(m: &DMatrix<f64>) -> Result<()> {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    let threshold = PD_TOL * max.abs().max(f64::MIN_POSITIVE);
    if !(min > threshold) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min, threshold });
    }
    Ok(())
}

/// Options for [`sample_covariance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceOptions {
    /// Added to every diagonal entry.
    pub ridge: f64,
    /// Divide by n − 1 instead of n.
    pub unbiased: bool,
}

impl Default for CovarianceOptions {
    fn default() -> Self {
        Self { ridge: 0.0, unbiased: false }
    }
}

/// Maximum-likelihood covariance of the column-centered data plus `ridge·I`.
pub fn sample_covariance(data: &Dataset, opts: &CovarianceOptions) -> Result<CovarianceBlocks> {
    let full = raw_covariance(data.matrix(), None, opts.unbiased)?;
    finish(full, data, opts)
}

/// Like [`sample_covariance`] but each row is counted `weights[i]` times
/// (bootstrap multiplicities). The effective sample size is the weight total.
pub fn weighted_sample_covariance(data: &Dataset, weights: &[f64], opts: &CovarianceOptions) -> Result<CovarianceBlocks> {
    if weights.len() != data.n() {
        return Err(Error::invalid("weight vector length must match the number of rows"));
    }
    let full = raw_covariance(data.matrix(), Some(weights), opts.unbiased)?;
    finish(full, data, opts)
}

fn finish(mut full: DMatrix<f64>, data: &Dataset, opts: &CovarianceOptions) -> Result<CovarianceBlocks> {
    if !(opts.ridge >= 0.0) || !opts.ridge.is_finite() {
        return Err(Error::invalid(format!("ridge must be a finite nonnegative number, got {}", opts.ridge)));
    }
    let d = data.d_z();
    for k in 0..d + 2 {
        let var = full[(k, k)];
        let scale = data.matrix().column(k).amax();
        if !(var > (1e-14 * scale).powi(2)) {
            let column = match k {
                _ if k == d => "X".to_owned(),
                _ if k == d + 1 => "Y".to_owned(),
                _ => data.z_names()[k].clone(),
            };
            return Err(Error::DegenerateData { column });
        }
    }
    for k in 0..d + 2 {
        full[(k, k)] += opts.ridge;
    }
    check_positive_definite(&full)?;
    CovarianceBlocks::partition(&full)
}

/// Centered second moments of the columns of `values`.
pub fn raw_covariance(values: &DMatrix<f64>, weights: Option<&[f64]>, unbiased: bool) -> Result<DMatrix<f64>> {
    let (n, k) = values.shape();
    let total: f64 = match weights {
        Some(w) => w.iter().sum(),
        None => n as f64,
    };
    if total < 2.0 {
        return Err(Error::invalid("covariance needs at least two observations"));
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut mean = vec![0.0; k];
    for (j, m) in mean.iter_mut().enumerate() {
        let col = values.column(j);
        *m = (0..n).map(|i| weight(i) * col[i]).sum::<f64>() / total;
    }
    let mut cov = DMatrix::zeros(k, k);
    let mut centered = vec![0.0; k];
    for i in 0..n {
        let w = weight(i);
        if w == 0.0 {
            continue;
        }
        for j in 0..k {
            centered[j] = values[(i, j)] - mean[j];
        }
        for a in 0..k {
            let ca = w * centered[a];
            for b in a..k {
                cov[(a, b)] += ca * centered[b];
            }
        }
    }
    let denom = if unbiased { total - 1.0 } else { total };
    for a in 0..k {
        for b in a..k {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

/// Conditional second moments of (X, Y) given Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaTriple {
    pub kappa_xx: f64,
    pub kappa_xy: f64,
    pub kappa_yy: f64,
}

impl KappaTriple {
    /// κ_xx·κ_yy − κ_xy², clamped at zero when rounding pushes it slightly negative.
    pub fn discriminant(&self) -> f64 {
        let d = self.kappa_xx * self.kappa_yy - self.kappa_xy * self.kappa_xy;
        if d < 0.0 && d >= -CS_TOL * (self.kappa_xx * self.kappa_yy).abs().max(1.0) {
            0.0
        } else {
            d
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_xx > 0.0) || !(self.kappa_yy > 0.0) {
            return Err(Error::DomainError(format!(
                "conditional variances must be positive (kappa_xx = {}, kappa_yy = {})",
                self.kappa_xx, self.kappa_yy
            )));
        }
        if self.discriminant() < 0.0 {
            return Err(Error::DomainError(format!(
                "kappas violate Cauchy-Schwarz: kappa_xx*kappa_yy - kappa_xy^2 = {:.3e}",
                self.discriminant()
            )));
        }
        Ok(())
    }
}

/// OLS weights of Y on Z (`alpha`) and of X on Z (`beta`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionVectors {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
}

impl RegressionVectors {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() || alpha.is_empty() {
            return Err(Error::invalid("alpha and beta must be nonempty and of equal length"));
        }
        Ok(Self { alpha: DVector::from_vec(alpha), beta: DVector::from_vec(beta) })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Keeps only the coordinates listed in `keep`.
    pub fn select(&self, keep: &[usize]) -> Self {
        Self {
            alpha: DVector::from_iterator(keep.len(), keep.iter().map(|&j| self.alpha[j])),
            beta: DVector::from_iterator(keep.len(), keep.iter().map(|&j| self.beta[j])),
        }
    }
}

/// κ_xx, κ_xy, κ_yy from the Schur complement of Σ_zz.
pub fn compute_kappas(blocks: &CovarianceBlocks) -> Result<KappaTriple> {
    let chol = linalg::cholesky(&blocks.sigma_zz)?;
    let wx = chol.solve(&blocks.sigma_zx);
    let wy = chol.solve(&blocks.sigma_zy);
    let kappas = KappaTriple {
        kappa_xx: blocks.sigma_xx - blocks.sigma_zx.dot(&wx),
        kappa_xy: blocks.sigma_xy - blocks.sigma_zx.dot(&wy),
        kappa_yy: blocks.sigma_yy - blocks.sigma_zy.dot(&wy),
    };
    if !(kappas.kappa_xx > PD_TOL * blocks.sigma_xx.abs()) {
        return Err(Error::DegenerateData { column: "X given Z".into() });
    }
    if !(kappas.kappa_yy > PD_TOL * blocks.sigma_yy.abs()) {
        return Err(Error::DegenerateData { column: "Y given Z".into() });
    }
    Ok(kappas)
}

/// α = Σ_zz⁻¹Σ_zy and β = Σ_zz⁻¹Σ_zx via Cholesky.
pub fn compute_regression_vectors(blocks: &CovarianceBlocks) -> Result<RegressionVectors> {
    let chol = linalg::cholesky(&blocks.sigma_zz)?;
    let vectors = RegressionVectors { alpha: chol.solve(&blocks.sigma_zy), beta: chol.solve(&blocks.sigma_zx) };
    check_relevance(&vectors.beta, blocks)?;
    Ok(vectors)
}

fn check_relevance(beta: &DVector<f64>, blocks: &CovarianceBlocks) -> Result<()> {
    let d = blocks.d_z() as f64;
    let z_scale = (blocks.sigma_zz.trace() / d).max(f64::MIN_POSITIVE);
    let scale = (blocks.sigma_xx.abs() / z_scale).sqrt();
    let norm = beta.norm();
    if !(norm >= REL_TOL * scale) || norm == 0.0 {
        return Err(Error::Irrelevance { norm });
    }
    Ok(())
}
