//! Central finite-difference audit of analytic derivatives.

use nalgebra::DVector;

use crate::error::Result;
use crate::problem::NlpProblem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientAudit {
    /// Worst relative error over the objective gradient.
    pub objective: f64,
    /// Worst relative error over all equality-constraint Jacobian entries.
    pub equalities: f64,
    /// Worst relative error over all inequality-constraint Jacobian entries.
    pub inequalities: f64,
}

impl GradientAudit {
    pub fn worst(&self) -> f64 {
        self.objective.max(self.equalities).max(self.inequalities)
    }
}

/// Step used for coordinate `i`: `h = 1e-6 (1 + |x_i|)`.
pub fn fd_step(xi: f64) -> f64 {
    1e-6 * (1.0 + xi.abs())
}

/// Relative error `|a - b| / max(1, |a|, |b|)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs())
}

/// Compares every analytic derivative of `problem` at `x` against central
/// differences of the corresponding values.
pub fn audit_gradients(problem: &NlpProblem, x: &DVector<f64>) -> Result<GradientAudit> {
    let n = problem.dim();
    let (_, grad) = problem.objective(x)?;
    let (_, jac_eq) = problem.equalities(x)?;
    let (_, jac_in) = problem.inequalities(x)?;
    let mut audit = GradientAudit {
        objective: 0.0,
        equalities: 0.0,
        inequalities: 0.0,
    };
    for i in 0..n {
        let h = fd_step(x[i]);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;

        let fd = (problem.objective(&xp)?.0 - problem.objective(&xm)?.0) / (2.0 * h);
        audit.objective = audit.objective.max(rel_err(grad[i], fd));

        let (cp, _) = problem.equalities(&xp)?;
        let (cm, _) = problem.equalities(&xm)?;
        for r in 0..cp.len() {
            let fd = (cp[r] - cm[r]) / (2.0 * h);
            audit.equalities = audit.equalities.max(rel_err(jac_eq[(r, i)], fd));
        }
        let (gp, _) = problem.inequalities(&xp)?;
        let (gm, _) = problem.inequalities(&xm)?;
        for r in 0..gp.len() {
            let fd = (gp[r] - gm[r]) / (2.0 * h);
            audit.inequalities = audit.inequalities.max(rel_err(jac_in[(r, i)], fd));
        }
    }
    Ok(audit)
}
