//! Iterative AR prewhitening driven by model residuals.
//!
//! Each round decomposes the current data, fits an AR model to every
//! residual channel (along the sample axis) with Yule-Walker equations, and
//! filters the original data with those coefficients. Rounds stop when the
//! mean squared change of the prewhitened data drops below `tol`.

use nalgebra::DMatrix;

use crate::data::DataMatrix;
use crate::error::{CoreError, Result};

#[derive(Clone, Debug)]
pub struct PrewhitenResult {
    pub data: DataMatrix,
    /// AR coefficients per channel from the last round (`phi_1..phi_order`).
    pub coefficients: Vec<Vec<f64>>,
    pub rounds: usize,
    /// Mean squared change after each round.
    pub changes: Vec<f64>,
}

/// Sample autocovariance `r_0..r_order` of a series (mean removed, divided by n).
pub fn autocovariance(series: &[f64], order: usize) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    (0..=order)
        .map(|lag| {
            (lag..n)
                .map(|t| (series[t] - mean) * (series[t - lag] - mean))
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Solves the Yule-Walker equations by Levinson-Durbin recursion.
///
/// Returns `None` when a reflection coefficient reaches the unit circle
/// (non-stationary fit). A zero-variance series yields all-zero coefficients.
pub fn yule_walker(series: &[f64], order: usize) -> Option<Vec<f64>> {
    let r = autocovariance(series, order);
    if r[0] <= 0.0 {
        return Some(vec![0.0; order]);
    }
    let mut phi = vec![0.0; order];
    let mut err = r[0];
    for k in 0..order {
        let acc: f64 = (0..k).map(|j| phi[j] * r[k - j]).sum();
        let kappa = (r[k + 1] - acc) / err;
        if !kappa.is_finite() || kappa.abs() >= 1.0 {
            return None;
        }
        let prev = phi.clone();
        phi[k] = kappa;
        for j in 0..k {
            phi[j] = prev[j] - kappa * prev[k - 1 - j];
        }
        err *= 1.0 - kappa * kappa;
    }
    Some(phi)
}

/// `y_t = x_t - sum_j phi_j x_{t-j}`, with missing history treated as zero.
pub fn ar_filter(series: &[f64], phi: &[f64]) -> Vec<f64> {
    (0..series.len())
        .map(|t| {
            let past: f64 = phi
                .iter()
                .enumerate()
                .filter(|(j, _)| t > *j)
                .map(|(j, c)| c * series[t - 1 - j])
                .sum();
            series[t] - past
        })
        .collect()
}

/// Runs up to `max_rounds` of residual-driven AR prewhitening.
///
/// `residuals` maps the current data to its model residuals (same shape).
pub fn prewhiten_iterate<F>(
    data: &DataMatrix,
    mut residuals: F,
    ar_order: usize,
    max_rounds: usize,
    tol: f64,
) -> Result<PrewhitenResult>
where
    F: FnMut(&DataMatrix) -> Result<DMatrix<f64>>,
{
    if ar_order == 0 {
        return Err(CoreError::InvalidArgument(
            "ar_order must be at least 1".into(),
        ));
    }
    let original = data.values();
    let (p, n) = original.shape();
    let mut current = data.clone();
    let mut coefficients = vec![vec![0.0; ar_order]; p];
    let mut changes = Vec::new();
    for round in 0..max_rounds {
        let resid = residuals(&current)?;
        if resid.shape() != (p, n) {
            return Err(CoreError::InvalidArgument(format!(
                "residual callback returned {}x{}, expected {p}x{n}",
                resid.nrows(),
                resid.ncols()
            )));
        }
        let mut filtered = DMatrix::zeros(p, n);
        for ch in 0..p {
            let row: Vec<f64> = resid.row(ch).iter().copied().collect();
            let phi =
                yule_walker(&row, ar_order).ok_or(CoreError::NonStationary { channel: ch })?;
            let src: Vec<f64> = original.row(ch).iter().copied().collect();
            for (t, v) in ar_filter(&src, &phi).into_iter().enumerate() {
                filtered[(ch, t)] = v;
            }
            coefficients[ch] = phi;
        }
        let change = (&filtered - current.values()).norm_squared() / (p * n) as f64;
        changes.push(change);
        current = DataMatrix::new(filtered)?;
        log::debug!(
            "prewhitening round {}: mean squared change {change:e}",
            round + 1
        );
        if change < tol {
            break;
        }
    }
    Ok(PrewhitenResult {
        data: current,
        coefficients,
        rounds: changes.len(),
        changes,
    })
}
