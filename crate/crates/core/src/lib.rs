// `!(x > 0.0)` is used on purpose so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bounds;
pub mod cli;
pub mod covariance;
pub mod error;
pub mod experiments;
pub mod inference;
pub(crate) mod linalg;
pub mod rng;
pub mod simulate;

pub use bounds::{ate_bounds_scalar, ate_bounds_vector, AteBounds, NormOrder, TauSpec};
pub use covariance::{compute_kappas, compute_regression_vectors, sample_covariance, CovarianceBlocks, Dataset};
pub use error::{Error, Result};
