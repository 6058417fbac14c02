use nalgebra::DVector;

/// Radius update from the actual/predicted reduction ratio.
///
/// The branches are mutually exclusive: a very successful step that used
/// most of the region doubles it, a poor step halves it, anything else keeps
/// the radius.
pub fn trust_region_update(rho: f64, step: &DVector<f64>, delta: f64) -> f64 {
    if rho > 0.75 {
        if step.amax() <= 0.8 * delta {
            delta
        } else {
            2.0 * delta
        }
    } else if rho >= 0.1 {
        delta
    } else {
        // Also covers NaN ratios.
        0.5 * delta
    }
}
