//! Information-form (GMRF) view of a linear Gaussian model.

use nalgebra::{DMatrix, DVector};

use crate::model::LinearGaussianModel;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GmrfError {
    #[error("information matrix is {rows}x{cols}, potential has length {len}")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("information matrix is not symmetric (entry ({row}, {col}))")]
    NotSymmetric { row: usize, col: usize },
    #[error("information matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Information matrix `J` and potential vector `h` of `exp(−½xᵀJx + hᵀx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmrfModel {
    information: DMatrix<f64>,
    potential: DVector<f64>,
}

impl GmrfModel {
    /// Requires `J` square, exactly symmetric and positive definite.
    pub fn new(information: DMatrix<f64>, potential: DVector<f64>) -> Result<Self, GmrfError> {
        let (rows, cols) = information.shape();
        if rows != cols || potential.len() != rows {
            return Err(GmrfError::Shape {
                rows,
                cols,
                len: potential.len(),
            });
        }
        for r in 0..rows {
            for c in (r + 1)..cols {
                if information[(r, c)] != information[(c, r)] {
                    return Err(GmrfError::NotSymmetric { row: r, col: c });
                }
            }
        }
        if information.clone().cholesky().is_none() {
            return Err(GmrfError::NotPositiveDefinite);
        }
        Ok(GmrfModel { information, potential })
    }

    pub fn information(&self) -> &DMatrix<f64> {
        &self.information
    }

    pub fn potential(&self) -> &DVector<f64> {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.potential.len()
    }
}

/// `J = AᵀR⁻¹A + W⁻¹`, `h = AᵀR⁻¹y`.
pub fn lingauss_to_gmrf(model: &LinearGaussianModel) -> GmrfModel {
    let m = model.num_variables();
    let mut information = DMatrix::<f64>::zeros(m, m);
    let mut potential = DVector::<f64>::zeros(m);
    for (i, v) in model.variables().iter().enumerate() {
        information[(i, i)] = v.prior_precision();
    }
    for f in model.factors() {
        let inv_noise = 1.0 / f.noise_var();
        for &(i, ai) in f.coeffs() {
            potential[i] += ai * inv_noise * f.obs();
            for &(k, ak) in f.coeffs() {
                information[(i, k)] += ai * inv_noise * ak;
            }
        }
    }
    // Symmetric by construction (a·r·b == b·r·a is not guaranteed bitwise), so mirror.
    for r in 0..m {
        for c in (r + 1)..m {
            information[(c, r)] = information[(r, c)];
        }
    }
    GmrfModel::new(information, potential).expect("validated model yields a positive definite information matrix")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_unary_factor() {
        let m = LinearGaussianModel::from_dense(&[vec![1.0]], &[1.0], &[1.0], &[2.0]).unwrap();
        let g = lingauss_to_gmrf(&m);
        assert_eq!(g.information()[(0, 0)], 2.0);
        assert_eq!(g.potential()[0], 2.0);
    }

    #[test]
    fn zero_observations_give_zero_potential() {
        let m = crate::generate::four_variable_example([0.0; 3]);
        assert!(lingauss_to_gmrf(&m).potential().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(
            GmrfModel::new(bad, DVector::zeros(2)).unwrap_err(),
            GmrfError::NotPositiveDefinite
        );
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(matches!(
            GmrfModel::new(asym, DVector::zeros(2)),
            Err(GmrfError::NotSymmetric { .. })
        ));
    }
}
