use nalgebra::DVector;

use crate::error::{check_len, Result};

/// Componentwise clamp of `z` onto `[lower, upper]`.
pub fn project_box(
    z: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len("projection lower bound", z.len(), lower.len())?;
    check_len("projection upper bound", z.len(), upper.len())?;
    Ok(clamp(z, lower, upper))
}

pub(crate) fn clamp(z: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        z.len(),
        z.iter()
            .zip(lower.iter().zip(upper.iter()))
            .map(|(&v, (&l, &u))| v.max(l).min(u)),
    )
}

/// `|| x - P(x - g, l, u) ||_inf`, the first-order stationarity measure for
/// bound-constrained minimization.
pub fn projected_gradient_norm(
    x: &DVector<f64>,
    g: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        let p = (x[i] - g[i]).max(lower[i]).min(upper[i]);
        worst = worst.max((x[i] - p).abs());
    }
    worst
}
