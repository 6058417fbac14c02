//! Problem description: objective, constraints and simple bounds.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, NlpError, Result};

/// Objective callback returning the value and gradient at `x`.
pub type ObjectiveFn = dyn Fn(&DVector<f64>) -> (f64, DVector<f64>) + Send + Sync;

/// Vector-valued constraint callback returning `c(x)` and its `m x n` Jacobian.
pub type ConstraintFn = dyn Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>) + Send + Sync;

/// A block of vectorized constraints with a declared output dimension.
#[derive(Clone)]
pub struct Constraints {
    pub count: usize,
    pub eval: Arc<ConstraintFn>,
}

impl Constraints {
    pub fn new<F>(count: usize, eval: F) -> Self
    where
        F: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>) + Send + Sync + 'static,
    {
        Self {
            count,
            eval: Arc::new(eval),
        }
    }
}

/// Minimize `f(x)` subject to `c(x) = 0`, `g(x) >= 0` and `lower <= x <= upper`.
///
/// Callbacks are shared behind `Arc`s so a problem can be cloned cheaply and
/// solved from several starting points at once.
#[derive(Clone)]
pub struct NlpProblem {
    dim: usize,
    objective: Arc<ObjectiveFn>,
    eq: Option<Constraints>,
    ineq: Option<Constraints>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl std::fmt::Debug for NlpProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NlpProblem")
            .field("dim", &self.dim)
            .field("eq", &self.eq_count())
            .field("ineq", &self.ineq_count())
            .finish()
    }
}

impl NlpProblem {
    pub fn new<F>(dim: usize, objective: F) -> Self
    where
        F: Fn(&DVector<f64>) -> (f64, DVector<f64>) + Send + Sync + 'static,
    {
        Self {
            dim,
            objective: Arc::new(objective),
            eq: None,
            ineq: None,
            lower: DVector::from_element(dim, f64::NEG_INFINITY),
            upper: DVector::from_element(dim, f64::INFINITY),
        }
    }

    pub fn from_shared(dim: usize, objective: Arc<ObjectiveFn>) -> Self {
        Self {
            dim,
            objective,
            eq: None,
            ineq: None,
            lower: DVector::from_element(dim, f64::NEG_INFINITY),
            upper: DVector::from_element(dim, f64::INFINITY),
        }
    }

    pub fn with_equalities(mut self, constraints: Constraints) -> Self {
        self.eq = (constraints.count > 0).then_some(constraints);
        self
    }

    pub fn with_inequalities(mut self, constraints: Constraints) -> Self {
        self.ineq = (constraints.count > 0).then_some(constraints);
        self
    }

    pub fn with_bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_len("lower bounds", self.dim, lower.len())?;
        check_len("upper bounds", self.dim, upper.len())?;
        for i in 0..self.dim {
            if lower[i] > upper[i] || lower[i].is_nan() || upper[i].is_nan() {
                return Err(NlpError::InvalidBounds {
                    index: i,
                    lower: lower[i],
                    upper: upper[i],
                });
            }
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eq_count(&self) -> usize {
        self.eq.as_ref().map_or(0, |c| c.count)
    }

    pub fn ineq_count(&self) -> usize {
        self.ineq.as_ref().map_or(0, |c| c.count)
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        check_len("objective input", self.dim, x.len())?;
        let (f, g) = (self.objective)(x);
        check_len("objective gradient", self.dim, g.len())?;
        Ok((f, g))
    }

    pub fn equalities(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        eval_block("equality", self.eq.as_ref(), self.dim, x)
    }

    pub fn inequalities(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        eval_block("inequality", self.ineq.as_ref(), self.dim, x)
    }
}

fn eval_block(
    kind: &str,
    block: Option<&Constraints>,
    dim: usize,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_len(&format!("{kind} constraint input"), dim, x.len())?;
    match block {
        None => Ok((DVector::zeros(0), DMatrix::zeros(0, dim))),
        Some(block) => {
            let (c, jac) = (block.eval)(x);
            check_len(&format!("{kind} constraint values"), block.count, c.len())?;
            check_len(&format!("{kind} Jacobian rows"), block.count, jac.nrows())?;
            check_len(&format!("{kind} Jacobian columns"), dim, jac.ncols())?;
            Ok((c, jac))
        }
    }
}

/// Records how a slack-augmented problem maps back onto the original variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlackMap {
    pub original_dim: usize,
    pub eq_count: usize,
    pub slack_count: usize,
}

impl SlackMap {
    /// Builds a starting point for the augmented problem: slacks start at
    /// `max(g(x0), 0)`.
    pub fn lift(&self, original: &NlpProblem, x0: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("initial point", self.original_dim, x0.len())?;
        let mut z = DVector::zeros(self.original_dim + self.slack_count);
        z.rows_mut(0, self.original_dim).copy_from(x0);
        if self.slack_count > 0 {
            let (g, _) = original.inequalities(x0)?;
            for j in 0..self.slack_count {
                z[self.original_dim + j] = g[j].max(0.0);
            }
        }
        Ok(z)
    }

    pub fn variables(&self, z: &DVector<f64>) -> DVector<f64> {
        z.rows(0, self.original_dim).into_owned()
    }

    pub fn slacks(&self, z: &DVector<f64>) -> DVector<f64> {
        z.rows(self.original_dim, self.slack_count).into_owned()
    }
}

/// Converts `g(x) >= 0` into `g(x) - s = 0` with `s >= 0`.
///
/// The returned problem has `n + L` variables, the original equalities
/// followed by the `L` slack equalities, and no inequality block.
pub fn add_slacks(problem: &NlpProblem) -> (NlpProblem, SlackMap) {
    let n = problem.dim;
    let m = problem.eq_count();
    let l = problem.ineq_count();
    let map = SlackMap {
        original_dim: n,
        eq_count: m,
        slack_count: l,
    };
    if l == 0 {
        return (problem.clone(), map);
    }

    let objective = problem.objective.clone();
    let eq = problem.eq.clone();
    let ineq = problem.ineq.clone().expect("inequality block present");

    let lifted_objective = move |z: &DVector<f64>| {
        let x = z.rows(0, n).into_owned();
        let (f, g) = objective(&x);
        let mut grad = DVector::zeros(n + l);
        grad.rows_mut(0, n).copy_from(&g);
        (f, grad)
    };

    let lifted_constraints = move |z: &DVector<f64>| {
        let x = z.rows(0, n).into_owned();
        let mut c = DVector::zeros(m + l);
        let mut jac = DMatrix::zeros(m + l, n + l);
        if let Some(eq) = &eq {
            let (ce, je) = (eq.eval)(&x);
            c.rows_mut(0, m).copy_from(&ce);
            jac.view_mut((0, 0), (m, n)).copy_from(&je);
        }
        let (gi, ji) = (ineq.eval)(&x);
        for j in 0..l {
            c[m + j] = gi[j] - z[n + j];
            jac[(m + j, n + j)] = -1.0;
        }
        jac.view_mut((m, 0), (l, n)).copy_from(&ji);
        (c, jac)
    };

    let mut lower = DVector::from_element(n + l, 0.0);
    let mut upper = DVector::from_element(n + l, f64::INFINITY);
    lower.rows_mut(0, n).copy_from(&problem.lower);
    upper.rows_mut(0, n).copy_from(&problem.upper);

    let lifted = NlpProblem {
        dim: n + l,
        objective: Arc::new(lifted_objective),
        eq: Some(Constraints::new(m + l, lifted_constraints)),
        ineq: None,
        lower,
        upper,
    };
    (lifted, map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(dim: usize) -> NlpProblem {
        NlpProblem::new(dim, |x: &DVector<f64>| (0.5 * x.norm_squared(), x.clone()))
    }

    #[test]
    fn no_inequalities_is_unchanged() {
        let p = quadratic(3).with_equalities(Constraints::new(1, |x: &DVector<f64>| {
            (
                DVector::from_element(1, x.sum() - 1.0),
                DMatrix::from_element(1, 3, 1.0),
            )
        }));
        let (lifted, map) = add_slacks(&p);
        assert_eq!(lifted.dim(), 3);
        assert_eq!(lifted.eq_count(), 1);
        assert_eq!(lifted.ineq_count(), 0);
        assert_eq!(map.slack_count, 0);
    }

    #[test]
    fn single_inequality_becomes_slack_equality() {
        let p = quadratic(1).with_inequalities(Constraints::new(1, |x: &DVector<f64>| {
            (
                DVector::from_element(1, x[0] - 1.0),
                DMatrix::from_element(1, 1, 1.0),
            )
        }));
        let (lifted, map) = add_slacks(&p);
        assert_eq!(lifted.dim(), 2);
        assert_eq!(lifted.eq_count(), 1);
        assert_eq!(lifted.lower()[1], 0.0);
        assert!(lifted.upper()[1].is_infinite());

        let z = DVector::from_vec(vec![3.0, 0.5]);
        let (c, jac) = lifted.equalities(&z).unwrap();
        assert_eq!(c[0], 3.0 - 1.0 - 0.5);
        assert_eq!(jac[(0, 0)], 1.0);
        assert_eq!(jac[(0, 1)], -1.0);

        let z0 = map.lift(&p, &DVector::from_element(1, 3.0)).unwrap();
        assert_eq!(z0[1], 2.0);
        let z0 = map.lift(&p, &DVector::from_element(1, 0.0)).unwrap();
        assert_eq!(z0[1], 0.0);
    }

    #[test]
    fn callback_dimension_mismatch_is_reported() {
        let p = quadratic(2).with_equalities(Constraints::new(2, |_x: &DVector<f64>| {
            (DVector::zeros(1), DMatrix::zeros(1, 2))
        }));
        let err = p.equalities(&DVector::zeros(2)).unwrap_err();
        assert!(matches!(
            err,
            NlpError::DimensionMismatch {
                expected: 2,
                actual: 1,
                ..
            }
        ));
    }

    #[test]
    fn crossed_bounds_are_rejected() {
        let err = quadratic(2)
            .with_bounds(
                DVector::from_vec(vec![0.0, 2.0]),
                DVector::from_vec(vec![1.0, 1.0]),
            )
            .unwrap_err();
        assert!(matches!(err, NlpError::InvalidBounds { index: 1, .. }));
    }
}
