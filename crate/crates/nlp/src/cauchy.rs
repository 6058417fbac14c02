//! Generalized Cauchy point along the projected steepest-descent path and
//! the subspace step built on top of it.

use nalgebra::DVector;

use crate::operator::{model_value, LinearOperator, Restricted};
use crate::quasi_newton::HessianApprox;
use crate::steihaug::{box_cg, CgExit, Preconditioner};

#[derive(Clone, Debug)]
pub struct CauchyPoint {
    pub step: DVector<f64>,
    /// Coordinates strictly inside `(lo, hi)` at the Cauchy point.
    pub free: Vec<usize>,
}

/// First local minimizer of `g^T p + 0.5 p^T B p` along
/// `p(t) = P(-t g, lo, hi)`, `t >= 0`. Requires `lo <= 0 <= hi`.
pub fn cauchy_point<B: LinearOperator + ?Sized>(
    b: &B,
    g: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> CauchyPoint {
    let n = g.len();
    let mut d = -g;
    let mut breaks = vec![f64::INFINITY; n];
    for i in 0..n {
        if d[i] > 0.0 {
            breaks[i] = hi[i] / d[i];
        } else if d[i] < 0.0 {
            breaks[i] = lo[i] / d[i];
        }
        if breaks[i] <= 0.0 {
            d[i] = 0.0;
            breaks[i] = f64::INFINITY;
        }
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| breaks[i].is_finite()).collect();
    order.sort_by(|&a, &c| breaks[a].total_cmp(&breaks[c]).then(a.cmp(&c)));

    let mut p = DVector::zeros(n);
    let mut t_prev = 0.0;
    let mut next = 0;
    loop {
        if d.iter().all(|&v| v == 0.0) {
            break;
        }
        let t_next = order.get(next).map_or(f64::INFINITY, |&i| breaks[i]);
        let bd = b.apply(&d);
        let slope = g.dot(&d) + p.dot(&bd);
        let curvature = d.dot(&bd);
        if slope >= 0.0 {
            break;
        }
        let span = t_next - t_prev;
        if curvature > 0.0 {
            let tau = -slope / curvature;
            if tau < span {
                p.axpy(tau, &d, 1.0);
                break;
            }
        }
        if !span.is_finite() {
            // Unbounded descent direction; cannot happen with a finite region.
            break;
        }
        p.axpy(span, &d, 1.0);
        t_prev = t_next;
        while let Some(&i) = order.get(next) {
            if breaks[i] > t_prev {
                break;
            }
            p[i] = if d[i] > 0.0 { hi[i] } else { lo[i] };
            d[i] = 0.0;
            next += 1;
        }
    }
    for i in 0..n {
        p[i] = p[i].max(lo[i]).min(hi[i]);
    }
    let free = (0..n).filter(|&i| p[i] > lo[i] && p[i] < hi[i]).collect();
    CauchyPoint { step: p, free }
}

#[derive(Clone, Debug)]
pub struct SubspaceStep {
    pub cauchy: DVector<f64>,
    pub step: DVector<f64>,
    pub cg_exit: Option<CgExit>,
}

/// Cauchy point followed by truncated CG on the free variables, all inside
/// the box `[lo, hi]` (trust region intersected with the variable bounds).
pub fn subspace_step(
    b: &HessianApprox,
    g: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    cg_tol: f64,
    precondition: bool,
) -> SubspaceStep {
    let cp = cauchy_point(b, g, lo, hi);
    let mut step = cp.step.clone();
    let mut cg_exit = None;
    if !cp.free.is_empty() {
        let free = &cp.free;
        let grad_at_cp = g + b.apply(&cp.step);
        let g_red = DVector::from_iterator(free.len(), free.iter().map(|&i| grad_at_cp[i]));
        let lo_red = DVector::from_iterator(free.len(), free.iter().map(|&i| lo[i] - cp.step[i]));
        let hi_red = DVector::from_iterator(free.len(), free.iter().map(|&i| hi[i] - cp.step[i]));
        let tol = cg_tol.min(g_red.norm().sqrt());
        let result = if precondition {
            let reduced = b.restricted_dense(free);
            let m = Preconditioner::modified_cholesky(&reduced);
            box_cg(&reduced, &g_red, &lo_red, &hi_red, tol, m.as_ref())
        } else {
            let reduced = Restricted {
                full: b,
                index: free,
            };
            box_cg(&reduced, &g_red, &lo_red, &hi_red, tol, None)
        };
        for (k, &i) in free.iter().enumerate() {
            step[i] += result.step[k];
            step[i] = step[i].max(lo[i]).min(hi[i]);
        }
        cg_exit = Some(result.exit);
        // Guard against rounding pushing the composite step above the Cauchy model value.
        if model_value(b, g, &step) > model_value(b, g, &cp.step) {
            step = cp.step.clone();
        }
    }
    SubspaceStep {
        cauchy: cp.step,
        step,
        cg_exit,
    }
}
