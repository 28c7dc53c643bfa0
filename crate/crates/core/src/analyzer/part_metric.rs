use super::AnalysisError;

/// Part (Birkhoff) metric between two diagonal positive matrices given by
/// their diagonals: `max_e |ln(X_e / Y_e)|`.
///
/// For diagonal matrices the cone order is entry-wise, so the smallest `α`
/// with `αX ⪰ Y ⪰ α⁻¹X` is `max_e max(Y_e/X_e, X_e/Y_e)`.
pub fn part_metric(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    for (index, &value) in x.iter().chain(y).enumerate() {
        if value <= 0.0 || !value.is_finite() {
            return Err(AnalysisError::NonPositive {
                index: index % x.len().max(1),
                value,
            });
        }
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| (a.ln() - b.ln()).abs())
        .fold(0.0, f64::max))
}
