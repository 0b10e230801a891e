use crate::error::{Error, Result};

/// Floor on the relative-error denominator.
pub const GRADCHECK_FLOOR: f64 = 1e-8;

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Central-difference estimate of the gradient of `f` at `point`.
///
/// Fails with [`Error::NonFiniteEvaluation`] naming the coordinate whose probe
/// produced a non-finite value.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, point: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", format!("step must be positive, got {h}")));
    }
    let mut x = point.to_vec();
    let mut out = Vec::with_capacity(point.len());
    for k in 0..point.len() {
        x[k] = point[k] + h;
        let plus = f(&x);
        x[k] = point[k] - h;
        let minus = f(&x);
        x[k] = point[k];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFiniteEvaluation { index: k });
        }
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

/// Largest per-coordinate `|a - cd| / max(|a|, |cd|, 1e-8)` between `analytic`
/// and the central difference of `f` at `point`.
pub fn gradient_check(f: impl FnMut(&[f64]) -> f64, analytic: &[f64], point: &[f64], h: f64) -> Result<f64> {
    if analytic.len() != point.len() {
        return Err(Error::LengthMismatch {
            expected: point.len(),
            actual: analytic.len(),
        });
    }
    if let Some(index) = analytic.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteEvaluation { index });
    }
    let numeric = central_difference(f, point, h)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &cd)| (a - cd).abs() / a.abs().max(cd.abs()).max(GRADCHECK_FLOOR))
        .fold(0.0, f64::max))
}
