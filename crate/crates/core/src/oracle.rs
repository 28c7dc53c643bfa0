//! Dense ground truth `μ = J⁻¹h`, `P = J⁻¹` via a Cholesky factorization.

use nalgebra::{DMatrix, DVector};

use crate::gmrf::lingauss_to_gmrf;
use crate::model::LinearGaussianModel;

/// Largest model the dense oracle accepts.
pub const MAX_ORACLE_VARIABLES: usize = 2000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("model has {0} variables; the dense oracle is capped at {MAX_ORACLE_VARIABLES}")]
    TooLarge(usize),
    #[error("information matrix failed to factorize")]
    Factorization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl ExactPosterior {
    pub fn variances(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().copied().collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.mean.iter().copied().collect()
    }
}

pub fn dense_posterior(model: &LinearGaussianModel) -> Result<ExactPosterior, OracleError> {
    let m = model.num_variables();
    if m > MAX_ORACLE_VARIABLES {
        return Err(OracleError::TooLarge(m));
    }
    let gmrf = lingauss_to_gmrf(model);
    let chol = gmrf
        .information()
        .clone()
        .cholesky()
        .ok_or(OracleError::Factorization)?;
    let mean = chol.solve(gmrf.potential());
    let covariance = chol.inverse();
    Ok(ExactPosterior { mean, covariance })
}
