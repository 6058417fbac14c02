//! Bound- and equality-constrained nonlinear minimization.
//!
//! An augmented-Lagrangian outer loop drives a trust-region inner solver:
//! each inner iteration computes a generalized Cauchy point by gradient
//! projection, refines it with truncated conjugate gradients on the free
//! variables, and updates a quasi-Newton model (SR1, BFGS or their
//! limited-memory forms) on every trial step. Inequalities are handled by
//! slack variables. Every solve produces a [`SolveTrace`] with one record
//! per inner iteration.
//!
//! ```
//! use adis_nlp::{solve, AugLagConfig, Constraints, NlpProblem};
//! use nalgebra::{DMatrix, DVector};
//!
//! // min x0 + x1 on the unit circle.
//! let problem = NlpProblem::new(2, |x: &DVector<f64>| (x.sum(), DVector::from_element(2, 1.0)))
//!     .with_equalities(Constraints::new(1, |x: &DVector<f64>| {
//!         let c = DVector::from_element(1, x.norm_squared() - 1.0);
//!         let jac = DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]]);
//!         (c, jac)
//!     }));
//! let sol = solve(&problem, &DVector::from_vec(vec![0.5, -0.2]), &AugLagConfig::default()).unwrap();
//! assert!(sol.is_converged());
//! let target = -1.0 / 2f64.sqrt();
//! assert!((sol.x_star[0] - target).abs() < 1e-5);
//! ```

mod auglag;
mod bounds;
mod cauchy;
mod error;
pub mod gradcheck;
mod inner;
mod operator;
mod problem;
mod quasi_newton;
mod steihaug;
mod trace;
mod trust_region;

pub use auglag::{kkt_residual, solve, AugLagConfig, NlpSolution, NlpStatus, SolutionSummary};
pub use bounds::{project_box, projected_gradient_norm};
pub use cauchy::{cauchy_point, subspace_step, CauchyPoint, SubspaceStep};
pub use error::{NlpError, Result};
pub use inner::{
    inner_solve, Evaluation, InnerOptions, InnerResult, InnerState, InnerStep, SmoothFunction,
};
pub use operator::{model_value, LinearOperator, Restricted};
pub use problem::{add_slacks, ConstraintFn, Constraints, NlpProblem, ObjectiveFn, SlackMap};
pub use quasi_newton::{HessianApprox, QnKind, QnSafeguards, UpdateOutcome};
pub use steihaug::{steihaug_cg, CgExit, CgResult, Preconditioner};
pub use trace::{IterRecord, OuterBranch, OuterRecord, SolveTrace};
pub use trust_region::trust_region_update;

pub use nalgebra;
