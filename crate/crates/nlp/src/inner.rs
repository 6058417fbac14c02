//! Bound-constrained trust-region minimization of a smooth merit function.

use nalgebra::DVector;

use crate::bounds::{clamp, projected_gradient_norm};
use crate::cauchy::subspace_step;
use crate::error::{NlpError, Result};
use crate::operator::model_value;
use crate::quasi_newton::{HessianApprox, UpdateOutcome};
use crate::trust_region::trust_region_update;

/// Value and gradient of the function being minimized, plus the raw
/// objective and constraint violation for diagnostics.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: f64,
    pub grad: DVector<f64>,
    pub objective: f64,
    pub infeasibility: f64,
}

pub trait SmoothFunction {
    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation>;
}

impl<F> SmoothFunction for F
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
        let (value, grad) = self(x);
        Ok(Evaluation {
            value,
            grad,
            objective: value,
            infeasibility: 0.0,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct InnerOptions {
    pub eta_grad: f64,
    pub j_max: usize,
    pub rho_accept: f64,
    pub precondition: bool,
    /// Cap on the relative CG residual; the effective tolerance is
    /// `min(cg_tol, sqrt(||g_reduced||))`.
    pub cg_tol: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            eta_grad: 1e-6,
            j_max: 200,
            rho_accept: 0.1,
            precondition: false,
            cg_tol: 0.1,
        }
    }
}

/// Quasi-Newton approximation and trust-region radius, carried across
/// inner solves.
#[derive(Clone, Debug)]
pub struct InnerState {
    pub hessian: HessianApprox,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerStep {
    pub inner: usize,
    pub value: f64,
    pub objective: f64,
    pub infeasibility: f64,
    pub proj_grad: f64,
    pub radius: f64,
    pub ratio: Option<f64>,
    pub step_norm: f64,
    pub accepted: bool,
    pub qn_skipped: bool,
}

#[derive(Clone, Debug)]
pub struct InnerResult {
    pub x: DVector<f64>,
    pub eval: Evaluation,
    pub proj_grad: f64,
    pub success: bool,
    pub steps: Vec<InnerStep>,
}

impl InnerResult {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }
}

/// Gradient projection to the Cauchy point, truncated CG on the free
/// variables, ratio test, radius update and a quasi-Newton update on every
/// trial step (rejected ones included).
///
/// Succeeds once `||x - P(x - grad)||_inf <= eta_grad`; gives up after
/// `j_max` iterations or when the radius collapses.
pub fn inner_solve<F: SmoothFunction + ?Sized>(
    fun: &F,
    x_start: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    state: &mut InnerState,
    opts: &InnerOptions,
) -> Result<InnerResult> {
    let n = x_start.len();
    let mut x = clamp(x_start, lower, upper);
    let mut eval = fun.evaluate(&x)?;
    if !eval.value.is_finite() || eval.grad.iter().any(|v| !v.is_finite()) {
        return Err(NlpError::NonFinite("merit function at inner start".into()));
    }
    let mut pg = projected_gradient_norm(&x, &eval.grad, lower, upper);
    let mut steps = Vec::new();
    if pg <= opts.eta_grad {
        return Ok(InnerResult {
            x,
            eval,
            proj_grad: pg,
            success: true,
            steps,
        });
    }

    for j in 1..=opts.j_max {
        let delta = state.radius;
        let lo = DVector::from_fn(n, |i, _| (lower[i] - x[i]).max(-delta).min(0.0));
        let hi = DVector::from_fn(n, |i, _| (upper[i] - x[i]).min(delta).max(0.0));
        let sub = subspace_step(
            &state.hessian,
            &eval.grad,
            &lo,
            &hi,
            opts.cg_tol,
            opts.precondition,
        );
        let p = sub.step;
        let predicted = -model_value(&state.hessian, &eval.grad, &p);

        let trial_x = clamp(&(&x + &p), lower, upper);
        let s = &trial_x - &x;
        let trial = fun.evaluate(&trial_x)?;
        let trial_ok = trial.value.is_finite() && trial.grad.iter().all(|v| v.is_finite());

        let ratio = if trial_ok && predicted > 0.0 {
            Some((eval.value - trial.value) / predicted)
        } else {
            None
        };
        let accepted = ratio.is_some_and(|r| r > opts.rho_accept);
        state.radius = trust_region_update(ratio.unwrap_or(f64::NEG_INFINITY), &p, delta);

        let qn_skipped = if trial_ok {
            let y = &trial.grad - &eval.grad;
            state.hessian.update(&s, &y) == UpdateOutcome::Skipped
        } else {
            true
        };

        if accepted {
            x = trial_x;
            eval = trial;
            pg = projected_gradient_norm(&x, &eval.grad, lower, upper);
        }

        steps.push(InnerStep {
            inner: j,
            value: eval.value,
            objective: eval.objective,
            infeasibility: eval.infeasibility,
            proj_grad: pg,
            radius: state.radius,
            ratio,
            step_norm: s.amax(),
            accepted,
            qn_skipped,
        });

        if pg <= opts.eta_grad {
            return Ok(InnerResult {
                x,
                eval,
                proj_grad: pg,
                success: true,
                steps,
            });
        }
        let scale = 1.0 + x.amax();
        if state.radius < 1e-15 * scale {
            break;
        }
    }

    Ok(InnerResult {
        x,
        eval,
        proj_grad: pg,
        success: false,
        steps,
    })
}
