//! Contrast functions on projections `w^T X` and the problem factory that
//! turns them into solver instances.

use std::sync::{Arc, OnceLock};

use adis_nlp::{Constraints, NlpProblem};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// `G(x) = log cosh x` and `G'(x) = tanh x`, overflow-safe.
pub fn g_logcosh(x: f64) -> (f64, f64) {
    let a = x.abs();
    let value = a + ((-2.0 * a).exp() + 1.0).ln() - std::f64::consts::LN_2;
    (value, x.tanh())
}

/// Nodes and weights of `n`-point Gauss-Hermite quadrature for the weight
/// `exp(-x^2)`, by Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, scaled) = gauss_hermite_scaled(n);
    let w = x
        .iter()
        .zip(&scaled)
        .map(|(xi, si)| si * (-xi * xi).exp())
        .collect();
    (x, w)
}

/// Like [`gauss_hermite`] but returns `w_i exp(x_i^2)`.
///
/// Nodes start from the eigenvalues of the Jacobi matrix and are polished by
/// Newton steps on `exp(-z^2 / 2)`-scaled orthonormal polynomials, which
/// also give the scaled weights without overflow for large `n`.
fn gauss_hermite_scaled(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut x: Vec<f64> = SymmetricEigen::new(jacobi)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    x.sort_by(|a, b| b.total_cmp(a));
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    // Value and derivative factor of the scaled degree-n polynomial at z.
    let eval = |z: f64| {
        let mut p1 = pim4 * (-0.5 * z * z).exp();
        let mut p2 = 0.0;
        for j in 0..n {
            let p3 = p2;
            p2 = p1;
            let jf = (j + 1) as f64;
            p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        }
        (p1, (2.0 * nf).sqrt() * p2)
    };
    let mut w = vec![0.0; n];
    for (xi, wi) in x.iter_mut().zip(w.iter_mut()) {
        let mut z = *xi;
        for _ in 0..5 {
            let (p, pp) = eval(z);
            let step = p / pp;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, pp) = eval(z);
        *xi = z;
        *wi = 2.0 / (pp * pp);
    }
    (x, w)
}

/// `E[log cosh v]` for standard normal `v` with `nodes`-point Gauss-Hermite.
///
/// The normal density is written as `exp(-x^2) * exp(x^2 / 2) / sqrt(2 pi)`,
/// which keeps the poles of `log cosh` at `+-i pi / 2` far enough from the
/// real axis for the rule to converge to round-off by 60 nodes.
pub fn gauss_expectation_with(nodes: usize) -> f64 {
    let (x, w) = gauss_hermite_scaled(nodes);
    let total: f64 = x
        .iter()
        .zip(&w)
        .map(|(xi, wi)| wi * (-0.5 * xi * xi).exp() * g_logcosh(*xi).0)
        .sum();
    total / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[log cosh v]` for standard normal `v`, computed once.
pub fn gauss_expectation() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| gauss_expectation_with(100))
}

/// A smooth scalar contrast of the projection `w^T X` (value and gradient in `w`).
pub trait ContrastFn: Send + Sync {
    fn name(&self) -> &str;
    fn evaluate(&self, w: &DVector<f64>, x: &DMatrix<f64>) -> (f64, DVector<f64>);
}

/// `J = (mean G(w^T x_i) - E[G(v)])^2` with `G = log cosh`.
#[derive(Clone, Copy, Debug)]
pub struct Negentropy {
    pub c_gauss: f64,
}

impl Default for Negentropy {
    fn default() -> Self {
        Self {
            c_gauss: gauss_expectation(),
        }
    }
}

impl Negentropy {
    pub const NAME: &'static str = "negentropy-logcosh";
}

impl ContrastFn for Negentropy {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn evaluate(&self, w: &DVector<f64>, x: &DMatrix<f64>) -> (f64, DVector<f64>) {
        let n = x.ncols() as f64;
        let proj = x.tr_mul(w);
        let mut mean_g = 0.0;
        let mut dg = DVector::zeros(proj.len());
        for (i, &y) in proj.iter().enumerate() {
            let (g, d) = g_logcosh(y);
            mean_g += g;
            dg[i] = d;
        }
        mean_g /= n;
        let gap = mean_g - self.c_gauss;
        let grad = (x * dg) * (2.0 * gap / n);
        (gap * gap, grad)
    }
}

/// Looks up a built-in contrast by name.
pub fn contrast_by_name(name: &str) -> Option<Arc<dyn ContrastFn>> {
    match name {
        Negentropy::NAME => Some(Arc::new(Negentropy::default())),
        _ => None,
    }
}

/// Supplementary term `b(w^T X)` with gradient in `w`.
pub type BHook = Arc<dyn Fn(&DVector<f64>, &DMatrix<f64>) -> (f64, DVector<f64>) + Send + Sync>;

/// Vector-valued constraint on a projection: values and Jacobian in `w`.
pub type ProjectionConstraintFn =
    dyn Fn(&DVector<f64>, &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) + Send + Sync;

#[derive(Clone)]
pub struct ProjectionConstraint {
    pub count: usize,
    pub eval: Arc<ProjectionConstraintFn>,
}

impl ProjectionConstraint {
    pub fn new<F>(count: usize, eval: F) -> Self
    where
        F: Fn(&DVector<f64>, &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) + Send + Sync + 'static,
    {
        Self {
            count,
            eval: Arc::new(eval),
        }
    }
}

/// User constraints applied to every component's projection.
#[derive(Clone, Default)]
pub struct ConstraintSet {
    pub equalities: Option<ProjectionConstraint>,
    pub inequalities: Option<ProjectionConstraint>,
}

/// Builds solver problems for single components and for the joint stage.
///
/// Objectives are negated: the solver minimizes `-(J + b)`.
#[derive(Clone)]
pub struct ProblemFactory {
    pub contrast: Arc<dyn ContrastFn>,
    pub b_hook: Option<BHook>,
    pub constraints: ConstraintSet,
}

pub fn compose(
    contrast: Arc<dyn ContrastFn>,
    b_hook: Option<BHook>,
    constraints: ConstraintSet,
) -> ProblemFactory {
    ProblemFactory {
        contrast,
        b_hook,
        constraints,
    }
}

impl ProblemFactory {
    pub fn negentropy() -> Self {
        compose(
            Arc::new(Negentropy::default()),
            None,
            ConstraintSet::default(),
        )
    }

    /// Contrast plus supplementary term for one projection (maximized).
    pub fn score(&self, w: &DVector<f64>, x: &DMatrix<f64>) -> (f64, DVector<f64>) {
        let (mut v, mut g) = self.contrast.evaluate(w, x);
        if let Some(b) = &self.b_hook {
            let (bv, bg) = b(w, x);
            v += bv;
            g += bg;
        }
        (v, g)
    }

    /// Sum of scores over the rows of `q_mat`.
    pub fn joint_score(&self, q_mat: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
        q_mat
            .row_iter()
            .map(|row| self.score(&row.transpose(), x).0)
            .sum()
    }

    /// Problem in the full projection space: variables `w`, no normalization.
    pub fn projection_problem(&self, x: Arc<DMatrix<f64>>) -> NlpProblem {
        self.reduced_problem(x, None, false)
    }

    /// Problem in reduced coordinates `w = basis z` with `z^T z = 1` appended
    /// to the user equalities.
    pub fn component_problem(&self, x: Arc<DMatrix<f64>>, basis: DMatrix<f64>) -> NlpProblem {
        self.reduced_problem(x, Some(basis), true)
    }

    fn reduced_problem(
        &self,
        x: Arc<DMatrix<f64>>,
        basis: Option<DMatrix<f64>>,
        unit: bool,
    ) -> NlpProblem {
        let dim = basis.as_ref().map_or(x.nrows(), |b| b.ncols());
        let basis = basis.map(Arc::new);
        let lift = {
            let basis = basis.clone();
            move |z: &DVector<f64>| match &basis {
                Some(b) => b.as_ref() * z,
                None => z.clone(),
            }
        };
        let pull = {
            let basis = basis.clone();
            move |g: DVector<f64>| match &basis {
                Some(b) => b.tr_mul(&g),
                None => g,
            }
        };
        let pull_jac = {
            let basis = basis.clone();
            move |j: DMatrix<f64>| match &basis {
                Some(b) => j * b.as_ref(),
                None => j,
            }
        };

        let objective = {
            let this = self.clone();
            let x = x.clone();
            let (lift, pull) = (lift.clone(), pull.clone());
            move |z: &DVector<f64>| {
                let (v, g) = this.score(&lift(z), &x);
                (-v, -pull(g))
            }
        };
        let mut problem = NlpProblem::new(dim, objective);

        let user_eq = self.constraints.equalities.clone();
        let eq_count = user_eq.as_ref().map_or(0, |c| c.count) + usize::from(unit);
        if eq_count > 0 {
            let x = x.clone();
            let (lift, pull_jac) = (lift.clone(), pull_jac.clone());
            problem =
                problem.with_equalities(Constraints::new(eq_count, move |z: &DVector<f64>| {
                    let mut c = DVector::zeros(eq_count);
                    let mut jac = DMatrix::zeros(eq_count, dim);
                    let mut row = 0;
                    if let Some(uc) = &user_eq {
                        let w = lift(z);
                        let (cv, cj) = (uc.eval)(&w, &x);
                        if !shape_ok("equality", uc.count, w.len(), &cv, &cj) {
                            return mismatch(dim);
                        }
                        let cj = pull_jac(cj);
                        c.rows_mut(0, uc.count).copy_from(&cv);
                        jac.rows_mut(0, uc.count).copy_from(&cj);
                        row = uc.count;
                    }
                    if unit {
                        c[row] = z.norm_squared() - 1.0;
                        jac.row_mut(row).copy_from(&(z * 2.0).transpose());
                    }
                    (c, jac)
                }));
        }
        if let Some(ui) = self.constraints.inequalities.clone() {
            let (lift, pull_jac) = (lift.clone(), pull_jac.clone());
            problem =
                problem.with_inequalities(Constraints::new(ui.count, move |z: &DVector<f64>| {
                    let w = lift(z);
                    let (cv, cj) = (ui.eval)(&w, &x);
                    if !shape_ok("inequality", ui.count, w.len(), &cv, &cj) {
                        return mismatch(dim);
                    }
                    (cv, pull_jac(cj))
                }));
        }
        problem
    }

    /// Joint problem over all `q^2` entries of `Q` (rows stacked), with the
    /// single constraint `sum_{i<=j} (w_i^T w_j - delta_ij)^2 = 0` followed
    /// by the user constraints of every component.
    pub fn joint_problem(&self, x: Arc<DMatrix<f64>>, q: usize) -> NlpProblem {
        let n = q * q;
        let objective = {
            let this = self.clone();
            let x = x.clone();
            move |v: &DVector<f64>| {
                let mut total = 0.0;
                let mut grad = DVector::zeros(n);
                for k in 0..q {
                    let w = v.rows(k * q, q).into_owned();
                    let (s, g) = this.score(&w, &x);
                    total += s;
                    grad.rows_mut(k * q, q).copy_from(&g);
                }
                (-total, -grad)
            }
        };
        let user_eq = self.constraints.equalities.clone();
        let per = user_eq.as_ref().map_or(0, |c| c.count);
        let count = 1 + per * q;
        let eq = {
            let x = x.clone();
            Constraints::new(count, move |v: &DVector<f64>| {
                let mut c = DVector::zeros(count);
                let mut jac = DMatrix::zeros(count, n);
                let (value, grad) = orthonormality_residual(v, q);
                c[0] = value;
                jac.row_mut(0).copy_from(&grad.transpose());
                if let Some(uc) = &user_eq {
                    for k in 0..q {
                        let w = v.rows(k * q, q).into_owned();
                        let (cv, cj) = (uc.eval)(&w, &x);
                        if !shape_ok("equality", per, q, &cv, &cj) {
                            return mismatch(n);
                        }
                        let r0 = 1 + k * per;
                        c.rows_mut(r0, per).copy_from(&cv);
                        jac.view_mut((r0, k * q), (per, q)).copy_from(&cj);
                    }
                }
                (c, jac)
            })
        };
        let mut problem = NlpProblem::new(n, objective).with_equalities(eq);
        if let Some(ui) = self.constraints.inequalities.clone() {
            let per_in = ui.count;
            problem =
                problem.with_inequalities(Constraints::new(per_in * q, move |v: &DVector<f64>| {
                    let mut c = DVector::zeros(per_in * q);
                    let mut jac = DMatrix::zeros(per_in * q, n);
                    for k in 0..q {
                        let w = v.rows(k * q, q).into_owned();
                        let (cv, cj) = (ui.eval)(&w, &x);
                        if !shape_ok("inequality", per_in, q, &cv, &cj) {
                            return mismatch(n);
                        }
                        c.rows_mut(k * per_in, per_in).copy_from(&cv);
                        jac.view_mut((k * per_in, k * q), (per_in, q))
                            .copy_from(&cj);
                    }
                    (c, jac)
                }));
        }
        problem
    }
}

fn shape_ok(kind: &str, count: usize, width: usize, c: &DVector<f64>, jac: &DMatrix<f64>) -> bool {
    let ok = c.len() == count && jac.shape() == (count, width);
    if !ok {
        log::error!(
            "user {kind} constraint declared {count} values on {width} variables but returned {} values and a {}x{} Jacobian",
            c.len(),
            jac.nrows(),
            jac.ncols()
        );
    }
    ok
}

// An empty block never matches a non-empty declaration, so the solver
// reports a dimension mismatch on first evaluation.
fn mismatch(dim: usize) -> (DVector<f64>, DMatrix<f64>) {
    (DVector::zeros(0), DMatrix::zeros(0, dim))
}

/// `sum_{i<=j} (w_i^T w_j - delta_ij)^2` and its gradient, for `Q` stored
/// as stacked rows in `v`.
pub fn orthonormality_residual(v: &DVector<f64>, q: usize) -> (f64, DVector<f64>) {
    let mut value = 0.0;
    let mut grad = DVector::zeros(q * q);
    for i in 0..q {
        for j in i..q {
            let wi = v.rows(i * q, q);
            let wj = v.rows(j * q, q);
            let dev = wi.dot(&wj) - if i == j { 1.0 } else { 0.0 };
            value += dev * dev;
            if i == j {
                let g = wi * (4.0 * dev);
                let mut block = grad.rows_mut(i * q, q);
                block += g;
            } else {
                let gi = wj * (2.0 * dev);
                let gj = wi * (2.0 * dev);
                {
                    let mut block = grad.rows_mut(i * q, q);
                    block += gi;
                }
                let mut block = grad.rows_mut(j * q, q);
                block += gj;
            }
        }
    }
    (value, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logcosh_edge_values() {
        assert_eq!(g_logcosh(0.0), (0.0, 0.0));
        let (v, d) = g_logcosh(700.0);
        assert!((v - (700.0 - std::f64::consts::LN_2)).abs() < 1e-12);
        assert_eq!(d, 1.0);
        let (v, _) = g_logcosh(-1e308);
        assert!(v.is_finite());
    }

    #[test]
    fn hermite_rule_integrates_polynomials() {
        let (x, w) = gauss_hermite(20);
        let pi_sqrt = std::f64::consts::PI.sqrt();
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(a, b)| a * a * b).sum();
        let m4: f64 = x.iter().zip(&w).map(|(a, b)| a.powi(4) * b).sum();
        assert!((m0 - pi_sqrt).abs() < 1e-13);
        assert!((m2 - pi_sqrt / 2.0).abs() < 1e-13);
        assert!((m4 - 3.0 * pi_sqrt / 4.0).abs() < 1e-13);
    }

    #[test]
    fn zero_projection_gives_squared_constant() {
        let neg = Negentropy::default();
        let x = DMatrix::from_fn(3, 10, |i, j| (i as f64 - 1.0) * (j as f64 * 0.3).sin());
        let (j, g) = neg.evaluate(&DVector::zeros(3), &x);
        assert_eq!(j, neg.c_gauss * neg.c_gauss);
        assert_eq!(g, DVector::zeros(3));
    }
}
