//! Augmented-Lagrangian outer iteration.
//!
//! Works on `min f(x)` s.t. `c(x) = 0`, `l <= x <= u`; inequalities are
//! converted with slack variables first. The merit function is
//! `L(x, lambda, mu) = f(x) - lambda^T c(x) + (mu / 2) ||c(x)||^2`.
//! The penalty `mu` grows by `theta_h` when the constraint test fails and
//! shrinks by `theta_l` when an inner solve fails; tolerances are reset to
//! `mu^-0.1` and `mu^-1` whenever `mu` changes.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bounds::{clamp, projected_gradient_norm};
use crate::error::{check_len, NlpError, Result};
use crate::inner::{inner_solve, Evaluation, InnerOptions, InnerState, SmoothFunction};
use crate::problem::{add_slacks, NlpProblem};
use crate::quasi_newton::{HessianApprox, QnKind, QnSafeguards};
use crate::trace::{IterRecord, OuterBranch, OuterRecord, SolveTrace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugLagConfig {
    pub mu0: f64,
    pub theta_h: f64,
    pub theta_l: f64,
    pub eta_con_star: f64,
    pub eta_grad_star: f64,
    pub max_outer: usize,
    pub j_max: usize,
    pub rho_accept: f64,
    pub qn_kind: QnKind,
    pub lm_memory: usize,
    pub precondition: bool,
    /// Below this penalty the retry ladder gives up with `InnerFailure`.
    pub mu_floor: f64,
    pub initial_radius: f64,
    pub safeguards: QnSafeguards,
}

impl Default for AugLagConfig {
    fn default() -> Self {
        Self {
            mu0: 10.0,
            theta_h: 10.0,
            theta_l: 0.5,
            eta_con_star: 1e-6,
            eta_grad_star: 1e-6,
            max_outer: 100,
            j_max: 200,
            rho_accept: 0.1,
            qn_kind: QnKind::Sr1,
            lm_memory: 10,
            precondition: false,
            mu_floor: 1e-8,
            initial_radius: 1.0,
            safeguards: QnSafeguards::default(),
        }
    }
}

impl AugLagConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(NlpError::InvalidConfig(msg.to_string()));
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return bad("mu0 must be positive");
        }
        if self.theta_h.is_nan() || self.theta_h <= 1.0 {
            return bad("theta_h must exceed 1");
        }
        if !(self.theta_l > 0.0 && self.theta_l < 1.0) {
            return bad("theta_l must lie in (0, 1)");
        }
        if !(self.eta_con_star > 0.0 && self.eta_grad_star > 0.0) {
            return bad("stopping tolerances must be positive");
        }
        if !(self.rho_accept > 0.0 && self.rho_accept < 1.0) {
            return bad("rho_accept must lie in (0, 1)");
        }
        if self.j_max == 0 {
            return bad("j_max must be at least 1");
        }
        if matches!(self.qn_kind, QnKind::LSr1 | QnKind::LBfgs) && self.lm_memory == 0 {
            return bad("lm_memory must be at least 1 for limited-memory updates");
        }
        if self.mu_floor.is_nan()
            || self.mu_floor <= 0.0
            || self.initial_radius.is_nan()
            || self.initial_radius <= 0.0
        {
            return bad("mu_floor and initial_radius must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NlpStatus {
    Converged,
    MaxIterations,
    InnerFailure,
}

#[derive(Clone, Debug)]
pub struct NlpSolution {
    pub x_star: DVector<f64>,
    /// Slack values for the converted inequalities (empty without them).
    pub slacks: DVector<f64>,
    pub lambda_eq: DVector<f64>,
    pub lambda_ineq: DVector<f64>,
    pub objective: f64,
    pub status: NlpStatus,
    /// KKT residuals at the returned point with `mu = 0`.
    pub kkt_grad: f64,
    pub kkt_feas: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub final_penalty: f64,
    pub trace: SolveTrace,
}

/// Summary without the trace, for JSON export.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub status: NlpStatus,
    pub objective: f64,
    pub kkt_grad: f64,
    pub kkt_feas: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub final_penalty: f64,
    pub x_star: Vec<f64>,
    pub lambda_eq: Vec<f64>,
    pub lambda_ineq: Vec<f64>,
}

impl NlpSolution {
    pub fn is_converged(&self) -> bool {
        self.status == NlpStatus::Converged
    }

    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            status: self.status,
            objective: self.objective,
            kkt_grad: self.kkt_grad,
            kkt_feas: self.kkt_feas,
            outer_iterations: self.outer_iterations,
            inner_iterations: self.inner_iterations,
            final_penalty: self.final_penalty,
            x_star: self.x_star.iter().copied().collect(),
            lambda_eq: self.lambda_eq.iter().copied().collect(),
            lambda_ineq: self.lambda_ineq.iter().copied().collect(),
        }
    }

    /// Recomputes the KKT residuals against `problem` from scratch.
    pub fn verify(&self, problem: &NlpProblem) -> Result<(f64, f64)> {
        let (lifted, map) = add_slacks(problem);
        let mut z = DVector::zeros(lifted.dim());
        z.rows_mut(0, map.original_dim).copy_from(&self.x_star);
        z.rows_mut(map.original_dim, map.slack_count)
            .copy_from(&self.slacks);
        let mut lambda = DVector::zeros(lifted.eq_count());
        lambda.rows_mut(0, map.eq_count).copy_from(&self.lambda_eq);
        lambda
            .rows_mut(map.eq_count, map.slack_count)
            .copy_from(&self.lambda_ineq);
        kkt_residual(&lifted, &z, &lambda)
    }
}

/// `(||x - P(x - grad_x L(x, lambda, 0))||_inf, ||c(x)||_inf)` for a problem
/// in equality-plus-bounds form.
pub fn kkt_residual(
    problem: &NlpProblem,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<(f64, f64)> {
    if problem.ineq_count() > 0 {
        return Err(NlpError::InvalidConfig(
            "kkt_residual expects equality/bound form; convert inequalities with add_slacks".into(),
        ));
    }
    check_len("multipliers", problem.eq_count(), lambda.len())?;
    let merit = Merit {
        problem,
        lambda,
        mu: 0.0,
    };
    let eval = merit.evaluate(x)?;
    Ok((
        projected_gradient_norm(x, &eval.grad, problem.lower(), problem.upper()),
        eval.infeasibility,
    ))
}

struct Merit<'a> {
    problem: &'a NlpProblem,
    lambda: &'a DVector<f64>,
    mu: f64,
}

impl Merit<'_> {
    fn constraints(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.problem.equalities(x)?.0)
    }
}

impl SmoothFunction for Merit<'_> {
    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
        let (f, gf) = self.problem.objective(x)?;
        let (c, jac) = self.problem.equalities(x)?;
        let shifted = self.lambda - &c * self.mu;
        let value = f - self.lambda.dot(&c) + 0.5 * self.mu * c.norm_squared();
        let grad = gf - jac.tr_mul(&shifted);
        Ok(Evaluation {
            value,
            grad,
            objective: f,
            infeasibility: c.amax(),
        })
    }
}

/// Solves `problem` from `x0`.
pub fn solve(
    problem: &NlpProblem,
    x0: &DVector<f64>,
    config: &AugLagConfig,
) -> Result<NlpSolution> {
    config.validate()?;
    check_len("initial point", problem.dim(), x0.len())?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(NlpError::NonFinite("initial point".into()));
    }
    let (lifted, map) = add_slacks(problem);
    let lower = lifted.lower().clone();
    let upper = lifted.upper().clone();
    let mut z = clamp(&map.lift(problem, x0)?, &lower, &upper);
    let m = lifted.eq_count();
    let mut lambda = DVector::zeros(m);

    let mut mu = config.mu0;
    let mut eta_con = mu.powf(-0.1);
    let mut eta_grad = 1.0 / mu;

    let (_, g0) = lifted.objective(&z)?;
    let gamma = g0.amax().max(1.0);
    let mut state = InnerState {
        hessian: HessianApprox::new(
            config.qn_kind,
            lifted.dim(),
            gamma,
            config.lm_memory,
            config.safeguards,
        ),
        radius: config.initial_radius,
    };
    let mut trace = SolveTrace::default();
    let mut status = NlpStatus::MaxIterations;

    'outer: for k in 0..config.max_outer {
        let mut inner_count = 0;
        loop {
            let merit = Merit {
                problem: &lifted,
                lambda: &lambda,
                mu,
            };
            let opts = InnerOptions {
                eta_grad,
                j_max: config.j_max,
                rho_accept: config.rho_accept,
                precondition: config.precondition,
                ..Default::default()
            };
            let res = inner_solve(&merit, &z, &lower, &upper, &mut state, &opts)?;
            inner_count += res.iterations();
            let lambda_norm = lambda.amax();
            for step in &res.steps {
                trace.records.push(IterRecord {
                    iter: trace.records.len(),
                    outer: k,
                    inner: step.inner,
                    objective: step.objective,
                    lagrangian: step.value,
                    proj_grad: step.proj_grad,
                    infeasibility: step.infeasibility,
                    multiplier_norm: lambda_norm,
                    penalty: mu,
                    radius: step.radius,
                    ratio: step.ratio,
                    step_norm: step.step_norm,
                    accepted: step.accepted,
                    qn_skipped: step.qn_skipped,
                    kkt_grad: None,
                    kkt_feas: None,
                });
            }
            if res.success {
                z = res.x;
                break;
            }
            // Retry from the previous outer iterate with a smaller penalty.
            mu *= config.theta_l;
            eta_con = mu.powf(-0.1);
            eta_grad = 1.0 / mu;
            state.radius = config.initial_radius;
            let (kkt_grad, infeasibility) = kkt_residual(&lifted, &z, &lambda)?;
            trace.outer.push(OuterRecord {
                outer: k,
                branch: OuterBranch::Retry,
                inner_iterations: inner_count,
                objective: lifted.objective(&z)?.0,
                infeasibility,
                kkt_grad,
                multiplier_norm: lambda.amax(),
                penalty: mu,
                eta_con,
                eta_grad,
            });
            inner_count = 0;
            log::debug!("outer {k}: inner solve failed, penalty lowered to {mu:e}");
            if mu < config.mu_floor {
                status = NlpStatus::InnerFailure;
                break 'outer;
            }
        }

        let merit = Merit {
            problem: &lifted,
            lambda: &lambda,
            mu,
        };
        let c = merit.constraints(&z)?;
        let c_norm = c.amax();
        let (kkt_grad, _) = kkt_residual(&lifted, &z, &lambda)?;
        let objective = lifted.objective(&z)?.0;

        let branch = if c_norm <= eta_con {
            if c_norm <= config.eta_con_star && kkt_grad <= config.eta_grad_star {
                OuterBranch::Stop
            } else {
                lambda -= &c * mu;
                eta_con /= mu.powf(0.9);
                eta_grad /= mu;
                OuterBranch::Multiplier
            }
        } else {
            mu *= config.theta_h;
            eta_con = mu.powf(-0.1);
            eta_grad = 1.0 / mu;
            OuterBranch::Penalty
        };
        log::debug!(
            "outer {k}: f = {objective:.10e}, |c| = {c_norm:.3e}, kkt = {kkt_grad:.3e}, mu = {mu:e}, {branch:?}"
        );
        trace.outer.push(OuterRecord {
            outer: k,
            branch,
            inner_iterations: inner_count,
            objective,
            infeasibility: c_norm,
            kkt_grad,
            multiplier_norm: lambda.amax(),
            penalty: mu,
            eta_con,
            eta_grad,
        });
        if branch == OuterBranch::Stop {
            status = NlpStatus::Converged;
            break;
        }
    }

    let (kkt_grad, kkt_feas) = kkt_residual(&lifted, &z, &lambda)?;
    if let Some(last) = trace.records.last_mut() {
        last.kkt_grad = Some(kkt_grad);
        last.kkt_feas = Some(kkt_feas);
    }
    let objective = problem.objective(&map.variables(&z))?.0;
    Ok(NlpSolution {
        x_star: map.variables(&z),
        slacks: map.slacks(&z),
        lambda_eq: lambda.rows(0, map.eq_count).into_owned(),
        lambda_ineq: lambda.rows(map.eq_count, map.slack_count).into_owned(),
        objective,
        status,
        kkt_grad,
        kkt_feas,
        outer_iterations: trace.outer.len(),
        inner_iterations: trace.records.len(),
        final_penalty: mu,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Constraints;
    use nalgebra::DMatrix;

    #[test]
    fn unconstrained_quadratic_reaches_b() {
        let b = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let b2 = b.clone();
        let p = NlpProblem::new(4, move |x: &DVector<f64>| {
            (0.5 * x.norm_squared() - b2.dot(x), x - &b2)
        });
        let sol = solve(&p, &DVector::zeros(4), &AugLagConfig::default()).unwrap();
        assert!(sol.is_converged());
        assert!((sol.x_star - b).amax() < 1e-6);
        assert_eq!(sol.kkt_feas, 0.0);
    }

    #[test]
    fn equality_constrained_projection_onto_plane() {
        // min ||x - a||^2 s.t. sum(x) = 1: x = a - (sum(a) - 1)/n.
        let a = DVector::from_vec(vec![0.3, 2.0, -1.0]);
        let a2 = a.clone();
        let p = NlpProblem::new(3, move |x: &DVector<f64>| {
            ((x - &a2).norm_squared(), (x - &a2) * 2.0)
        })
        .with_equalities(Constraints::new(1, |x: &DVector<f64>| {
            (
                DVector::from_element(1, x.sum() - 1.0),
                DMatrix::from_element(1, 3, 1.0),
            )
        }));
        let sol = solve(&p, &DVector::zeros(3), &AugLagConfig::default()).unwrap();
        assert!(sol.is_converged(), "{:?}", sol.status);
        let shift = (a.sum() - 1.0) / 3.0;
        let expected = a.map(|v| v - shift);
        assert!((&sol.x_star - expected).amax() < 1e-5);
        let (g, c) = sol.verify(&p).unwrap();
        assert!(g <= 1e-6 && c <= 1e-6);
        // Multiplier of sum(x) = 1: grad f = lambda * 1.
        assert!((sol.lambda_eq[0] - (-2.0 * shift)).abs() < 1e-4);
    }

    #[test]
    fn kkt_residual_at_non_stationary_point_is_gradient_norm() {
        let p = NlpProblem::new(3, |x: &DVector<f64>| (0.5 * x.norm_squared(), x.clone()));
        let x = DVector::from_vec(vec![0.2, -0.7, 0.4]);
        let (g, c) = kkt_residual(&p, &x, &DVector::zeros(0)).unwrap();
        assert_eq!(g, 0.7);
        assert_eq!(c, 0.0);
        let (g, _) = kkt_residual(&p, &DVector::zeros(3), &DVector::zeros(0)).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let p = NlpProblem::new(1, |x: &DVector<f64>| (x[0] * x[0], x * 2.0));
        let cfg = AugLagConfig {
            theta_l: 1.5,
            ..Default::default()
        };
        assert!(matches!(
            solve(&p, &DVector::zeros(1), &cfg),
            Err(NlpError::InvalidConfig(_))
        ));
        let x0 = DVector::from_element(1, f64::NAN);
        assert!(solve(&p, &x0, &AugLagConfig::default()).is_err());
    }
}
