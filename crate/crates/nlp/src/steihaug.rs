//! Truncated conjugate gradients on a box-shaped trust region.
//!
//! The region is `{v : lo <= v <= hi}` with `lo <= 0 <= hi`; the infinity-norm
//! trust region is itself such a box, and variable bounds are intersected
//! with it before the iteration starts.

use nalgebra::{DMatrix, DVector};

use crate::operator::LinearOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgExit {
    ZeroGradient,
    Converged,
    NegativeCurvature,
    Boundary,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct CgResult {
    pub step: DVector<f64>,
    pub exit: CgExit,
    pub iterations: usize,
}

/// Approximately minimizes `0.5 v^T B v + g^T v` over
/// `{||v||_inf <= delta} ∩ [lower, upper]`.
pub fn steihaug_cg<B: LinearOperator + ?Sized>(
    b: &B,
    g: &DVector<f64>,
    delta: f64,
    tol: f64,
    bounds: Option<(&DVector<f64>, &DVector<f64>)>,
    precond: Option<&Preconditioner>,
) -> CgResult {
    let r = g.len();
    let mut lo = DVector::from_element(r, -delta);
    let mut hi = DVector::from_element(r, delta);
    if let Some((l, u)) = bounds {
        for i in 0..r {
            lo[i] = lo[i].max(l[i]);
            hi[i] = hi[i].min(u[i]);
        }
    }
    box_cg(b, g, &lo, &hi, tol, precond)
}

/// Steihaug iteration inside an explicit box containing the origin.
pub(crate) fn box_cg<B: LinearOperator + ?Sized>(
    b: &B,
    g: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    tol: f64,
    precond: Option<&Preconditioner>,
) -> CgResult {
    let n = g.len();
    let mut v = DVector::zeros(n);
    let g_norm = g.norm();
    if g_norm == 0.0 || n == 0 {
        return CgResult {
            step: v,
            exit: CgExit::ZeroGradient,
            iterations: 0,
        };
    }
    let solve = |r: &DVector<f64>| match precond {
        Some(m) => m.solve(r),
        None => r.clone(),
    };

    let mut res = g.clone();
    let mut z = solve(&res);
    let mut d = -&z;
    let mut rz = res.dot(&z);
    let max_iter = 2 * n + 10;

    for it in 0..max_iter {
        let bd = b.apply(&d);
        let curvature = d.dot(&bd);
        if curvature <= 0.0 {
            let tau = step_to_boundary(&v, &d, lo, hi);
            if tau.is_finite() {
                v.axpy(tau, &d, 1.0);
            }
            return CgResult {
                step: v,
                exit: CgExit::NegativeCurvature,
                iterations: it + 1,
            };
        }
        let alpha = rz / curvature;
        let tau = step_to_boundary(&v, &d, lo, hi);
        if alpha >= tau {
            v.axpy(tau, &d, 1.0);
            return CgResult {
                step: v,
                exit: CgExit::Boundary,
                iterations: it + 1,
            };
        }
        v.axpy(alpha, &d, 1.0);
        res.axpy(alpha, &bd, 1.0);
        if res.norm() <= tol * g_norm {
            return CgResult {
                step: v,
                exit: CgExit::Converged,
                iterations: it + 1,
            };
        }
        z = solve(&res);
        let rz_next = res.dot(&z);
        let beta = rz_next / rz;
        rz = rz_next;
        d = &d * beta - &z;
    }
    CgResult {
        step: v,
        exit: CgExit::IterationLimit,
        iterations: max_iter,
    }
}

/// Largest `tau >= 0` with `lo <= v + tau d <= hi`.
pub(crate) fn step_to_boundary(
    v: &DVector<f64>,
    d: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> f64 {
    let mut tau = f64::INFINITY;
    for i in 0..v.len() {
        if d[i] > 0.0 {
            tau = tau.min(((hi[i] - v[i]) / d[i]).max(0.0));
        } else if d[i] < 0.0 {
            tau = tau.min(((lo[i] - v[i]) / d[i]).max(0.0));
        }
    }
    tau
}

/// Cholesky factor of `B + tau I`, with `tau` raised until the
/// factorization succeeds.
#[derive(Clone, Debug)]
pub struct Preconditioner {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    pub shift: f64,
}

impl Preconditioner {
    pub fn modified_cholesky(b: &DMatrix<f64>) -> Option<Self> {
        let n = b.nrows();
        if n == 0 {
            return None;
        }
        let sym = (b + b.transpose()) * 0.5;
        let beta = 1e-3 * sym.norm().max(1e-12);
        let min_diag = (0..n).map(|i| sym[(i, i)]).fold(f64::INFINITY, f64::min);
        let mut shift = if min_diag > 0.0 { 0.0 } else { beta - min_diag };
        for _ in 0..64 {
            let shifted = &sym + DMatrix::identity(n, n) * shift;
            if let Some(chol) = shifted.cholesky() {
                return Some(Self { chol, shift });
            }
            shift = (2.0 * shift).max(beta);
        }
        None
    }

    pub fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::model_value;

    #[test]
    fn identity_gives_negative_gradient() {
        let b = DMatrix::<f64>::identity(3, 3);
        let g = DVector::from_vec(vec![0.5, -2.0, 1.0]);
        let res = steihaug_cg(&b, &g, 100.0, 1e-12, None, None);
        assert!((res.step + &g).amax() < 1e-14);
        assert_eq!(res.exit, CgExit::Converged);
    }

    #[test]
    fn zero_gradient_gives_zero_step() {
        let b = DMatrix::<f64>::identity(2, 2);
        let res = steihaug_cg(&b, &DVector::zeros(2), 1.0, 1e-8, None, None);
        assert_eq!(res.exit, CgExit::ZeroGradient);
        assert_eq!(res.step, DVector::zeros(2));
    }

    #[test]
    fn negative_curvature_reaches_boundary() {
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0]));
        let g = DVector::from_vec(vec![0.3, 0.0]);
        let res = steihaug_cg(&b, &g, 0.7, 1e-10, None, None);
        assert_eq!(res.exit, CgExit::NegativeCurvature);
        assert!((res.step.amax() - 0.7).abs() < 1e-14);
        assert!(res.step[0] < 0.0);
        assert!(model_value(&b, &g, &res.step) < 0.0);
    }

    #[test]
    fn respects_variable_bounds() {
        let b = DMatrix::<f64>::identity(2, 2);
        let g = DVector::from_vec(vec![-4.0, 1.0]);
        let l = DVector::from_vec(vec![-10.0, -10.0]);
        let u = DVector::from_vec(vec![0.5, 10.0]);
        let res = steihaug_cg(&b, &g, 3.0, 1e-10, Some((&l, &u)), None);
        assert!(res.step[0] <= 0.5 + 1e-15);
        assert_eq!(res.exit, CgExit::Boundary);
    }

    #[test]
    fn preconditioned_solve_on_ill_conditioned_diagonal() {
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1e4, 1.0, 1e-2]));
        let g = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let m = Preconditioner::modified_cholesky(&b).unwrap();
        assert_eq!(m.shift, 0.0);
        let res = steihaug_cg(&b, &g, 1e6, 1e-12, None, Some(&m));
        assert_eq!(res.iterations, 1);
        let exact = DVector::from_vec(vec![-1e-4, -1.0, -100.0]);
        assert!((res.step - exact).amax() < 1e-9);
    }

    #[test]
    fn modified_cholesky_shifts_indefinite_matrix() {
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0]));
        let m = Preconditioner::modified_cholesky(&b).unwrap();
        assert!(m.shift > 1.0);
    }
}
