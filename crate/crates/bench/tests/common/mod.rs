//! Oracles shared by the integration tests.

use nalgebra::{DMatrix, DVector};

/// Unconstrained least squares on the columns in `support`, zero elsewhere.
fn ls_on(a: &DMatrix<f64>, b: &DVector<f64>, support: &[usize]) -> DVector<f64> {
    let mut x = DVector::zeros(a.ncols());
    if support.is_empty() {
        return x;
    }
    let sub = DMatrix::from_fn(a.nrows(), support.len(), |i, k| a[(i, support[k])]);
    let z = sub.svd(true, true).solve(b, 1e-14).unwrap();
    for (k, &j) in support.iter().enumerate() {
        x[j] = z[k];
    }
    x
}

/// Lawson-Hanson active-set NNLS.
pub fn lawson_hanson(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut passive = vec![false; n];
    let mut x = DVector::zeros(n);
    for _ in 0..3 * n {
        let w = a.tr_mul(&(b - a * &x));
        let pick = (0..n)
            .filter(|&j| !passive[j] && w[j] > 1e-12)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = pick else { break };
        passive[j] = true;
        loop {
            let support: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let z = ls_on(a, b, &support);
            if support.iter().all(|&k| z[k] > 0.0) {
                x = z;
                break;
            }
            let alpha = support
                .iter()
                .filter(|&&k| z[k] <= 0.0)
                .map(|&k| x[k] / (x[k] - z[k]))
                .fold(f64::INFINITY, f64::min);
            x += (z - &x) * alpha;
            for &k in &support {
                if x[k] <= 1e-14 {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
    }
    x
}

/// Best feasible support by enumeration; only for small `n`.
#[allow(dead_code)]
pub fn nnls_by_enumeration(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let n = a.ncols();
    (0u32..1 << n)
        .filter_map(|mask| {
            let support: Vec<usize> = (0..n).filter(|&k| mask >> k & 1 == 1).collect();
            let x = ls_on(a, b, &support);
            x.iter()
                .all(|&v| v >= -1e-12)
                .then(|| (a * x - b).norm_squared())
        })
        .fold(f64::INFINITY, f64::min)
}
