use nalgebra::DMatrix;

use super::{spectral_radius, AnalysisError};
use crate::gmrf::GmrfModel;

/// `ρ(|I − D^{-1/2} J D^{-1/2}|)` and whether it is below one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkSummability {
    pub radius: f64,
    pub summable: bool,
}

pub fn walk_summability(gmrf: &GmrfModel) -> Result<WalkSummability, AnalysisError> {
    walk_sum_radius(gmrf.information()).map(|radius| WalkSummability {
        radius,
        summable: radius < 1.0,
    })
}

/// Walk-sum radius of a raw information matrix, normalized to unit diagonal.
pub fn walk_sum_radius(information: &DMatrix<f64>) -> Result<f64, AnalysisError> {
    let (rows, cols) = information.shape();
    if rows != cols {
        return Err(AnalysisError::NotSquare { rows, cols });
    }
    let scale: Vec<f64> = (0..rows)
        .map(|i| {
            let d = information[(i, i)];
            if d > 0.0 && d.is_finite() {
                Ok(1.0 / d.sqrt())
            } else {
                Err(AnalysisError::NonPositiveDiagonal { index: i, value: d })
            }
        })
        .collect::<Result<_, _>>()?;
    let abs_residual = DMatrix::from_fn(rows, cols, |r, c| {
        if r == c {
            0.0
        } else {
            (information[(r, c)] * scale[r] * scale[c]).abs()
        }
    });
    spectral_radius(&abs_residual)
}
