//! Multistage extraction: random seeding on the constraint manifold,
//! deflation in reduced coordinates, and joint refinement of all rows.

use std::sync::Arc;

use adis_nlp::{solve, AugLagConfig, NlpSolution, NlpStatus, SolveTrace};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrast::{orthonormality_residual, ProblemFactory};
use crate::error::{CoreError, Result};

/// Columns whose residual falls below this after re-orthogonalization are
/// treated as dependent during basis completion.
const DEPENDENT_TOL: f64 = 1e-6;
/// Allowed loss in the joint objective before the joint stage is rejected.
const JOINT_GUARD: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitConfig {
    /// Random seeds drawn per component.
    pub n_s: usize,
    /// Best seeds handed to the solver per component.
    pub retained: usize,
    pub run_stage2: bool,
    pub rng_seed: u64,
    pub solver: AugLagConfig,
    /// Outer-iteration cap for the joint stage. Its single constraint has a
    /// vanishing gradient on the feasible set, so multipliers grow slowly.
    pub joint_max_outer: usize,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        Self {
            n_s: 1000,
            retained: 2,
            run_stage2: true,
            rng_seed: 0,
            solver: AugLagConfig::default(),
            joint_max_outer: 500,
        }
    }
}

impl PursuitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.retained == 0 || self.retained > self.n_s {
            return Err(CoreError::InvalidArgument(format!(
                "need 1 <= retained <= n_s, got retained = {}, n_s = {}",
                self.retained, self.n_s
            )));
        }
        self.solver.validate()?;
        Ok(())
    }
}

/// Outcome of the joint stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "outcome")]
pub enum JointOutcome {
    Skipped,
    Accepted {
        status: NlpStatus,
    },
    /// Stage 1 result kept; `reason` says why.
    FellBack {
        status: Option<NlpStatus>,
        reason: String,
    },
}

impl JointOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            JointOutcome::Skipped => "skipped",
            JointOutcome::Accepted { .. } => "accepted",
            JointOutcome::FellBack { .. } => "fell-back",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ComponentResult {
    pub w: DVector<f64>,
    pub objective: f64,
    pub trace: SolveTrace,
    pub status: NlpStatus,
    /// Index of the winning seed among the retained ones.
    pub seed_index: usize,
    /// Seeds whose solve did not converge.
    pub failed_seeds: usize,
}

#[derive(Clone, Debug)]
pub struct JointResult {
    pub q_mat: DMatrix<f64>,
    pub trace: SolveTrace,
    pub outcome: JointOutcome,
    /// Orthonormality residual of the raw solver iterate, before retraction.
    pub raw_residual: f64,
}

#[derive(Clone, Debug)]
pub struct PursuitResult {
    /// Unmixing rotation, rows `w_k`.
    pub q_mat: DMatrix<f64>,
    /// `Q x_tilde`.
    pub s_hat: DMatrix<f64>,
    pub component_traces: Vec<SolveTrace>,
    pub joint_trace: Option<SolveTrace>,
    pub joint_outcome: JointOutcome,
    pub stage1_objectives: Vec<f64>,
    /// Per-row objectives of the final `Q`.
    pub stage2_objectives: Vec<f64>,
    /// Rows of the Stage 1 rotation before sign normalization.
    pub stage1_q: DMatrix<f64>,
}

impl PursuitResult {
    /// Every trace in run order: components, then the joint stage.
    pub fn traces(&self) -> impl Iterator<Item = &SolveTrace> {
        self.component_traces.iter().chain(self.joint_trace.iter())
    }
}

/// Orthonormal basis of the complement of `priors` in `R^q`, as columns.
///
/// Modified Gram-Schmidt with one re-orthogonalization pass, completed from
/// the standard basis in index order.
pub fn orthogonal_complement(priors: &[DVector<f64>], q: usize) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(q);
    for w in priors {
        if let Some(v) = orthonormalize(w.clone(), &basis) {
            basis.push(v);
        }
    }
    let start = basis.len();
    for e in 0..q {
        if basis.len() == q {
            break;
        }
        if let Some(v) = orthonormalize(
            DVector::from_fn(q, |i, _| if i == e { 1.0 } else { 0.0 }),
            &basis,
        ) {
            basis.push(v);
        }
    }
    DMatrix::from_columns(&basis[start..])
}

fn orthonormalize(mut v: DVector<f64>, basis: &[DVector<f64>]) -> Option<DVector<f64>> {
    let norm0 = v.norm();
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
    }
    let norm = v.norm();
    (norm > DEPENDENT_TOL * norm0.max(1.0)).then(|| v / norm)
}

/// Draws `n_s` unit vectors in the reduced space and keeps the `retained`
/// best by contrast value of `W_tilde z` (ties to the earlier draw).
pub fn seed_search(
    factory: &ProblemFactory,
    w_tilde: &DMatrix<f64>,
    x_tilde: &DMatrix<f64>,
    n_s: usize,
    retained: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(DVector<f64>, f64)> {
    let d = w_tilde.ncols();
    let mut draws: Vec<(DVector<f64>, f64)> = Vec::with_capacity(n_s);
    while draws.len() < n_s {
        let z = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let norm = z.norm();
        if norm == 0.0 {
            continue;
        }
        let z = z / norm;
        let value = factory.score(&(w_tilde * &z), x_tilde).0;
        draws.push((z, value));
    }
    // Stable sort keeps draw order among equal values.
    draws.sort_by(|a, b| b.1.total_cmp(&a.1));
    draws.truncate(retained.min(n_s));
    draws
}

/// Stage 0 and Stage 1 for component `k` (1-based) given the previous rows.
pub fn extract_component(
    k: usize,
    priors: &[DVector<f64>],
    x_tilde: &Arc<DMatrix<f64>>,
    factory: &ProblemFactory,
    config: &PursuitConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ComponentResult> {
    let q = x_tilde.nrows();
    let w_tilde = orthogonal_complement(priors, q);
    let seeds: Vec<DVector<f64>> = if w_tilde.ncols() == 1 {
        // Zero-dimensional manifold: both signs, best first.
        let mut both: Vec<(DVector<f64>, f64)> = [1.0, -1.0]
            .into_iter()
            .map(|s| {
                let z = DVector::from_element(1, s);
                let v = factory.score(&(&w_tilde * &z), x_tilde).0;
                (z, v)
            })
            .collect();
        both.sort_by(|a, b| b.1.total_cmp(&a.1));
        both.into_iter().map(|(z, _)| z).collect()
    } else {
        seed_search(factory, &w_tilde, x_tilde, config.n_s, config.retained, rng)
            .into_iter()
            .map(|(z, _)| z)
            .collect()
    };

    let problem = factory.component_problem(x_tilde.clone(), w_tilde.clone());
    let runs: Vec<Result<NlpSolution>> = seeds
        .par_iter()
        .map(|z0| solve(&problem, z0, &config.solver).map_err(CoreError::from))
        .collect();

    let mut best: Option<(usize, NlpSolution)> = None;
    let mut traces = Vec::new();
    let mut failed = 0;
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok(sol) if sol.is_converged() => {
                let better = best
                    .as_ref()
                    .is_none_or(|(_, b)| sol.objective < b.objective);
                if better {
                    best = Some((i, sol));
                }
            }
            Ok(sol) => {
                log::warn!("component {k}: seed {i} ended with status {:?}", sol.status);
                failed += 1;
                traces.push(sol.trace);
            }
            Err(e) => return Err(e),
        }
    }
    let Some((seed_index, sol)) = best else {
        return Err(CoreError::ComponentFailed {
            component: k,
            traces,
        });
    };
    let z = &sol.x_star / sol.x_star.norm();
    let w = &w_tilde * z;
    let objective = factory.score(&w, x_tilde).0;
    log::debug!(
        "component {k}: objective {objective:.6e} from seed {seed_index} ({} outer, {} inner)",
        sol.outer_iterations,
        sol.inner_iterations
    );
    Ok(ComponentResult {
        w,
        objective,
        trace: sol.trace,
        status: sol.status,
        seed_index,
        failed_seeds: failed,
    })
}

/// Nearest orthogonal matrix `U V^T` from the SVD.
pub fn polar_retraction(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let smallest = svd.singular_values.min();
    if smallest.is_nan() || smallest <= 0.0 {
        return None;
    }
    Some(svd.u? * svd.v_t?)
}

fn stack_rows(q_mat: &DMatrix<f64>) -> DVector<f64> {
    let q = q_mat.nrows();
    DVector::from_fn(q * q, |idx, _| q_mat[(idx / q, idx % q)])
}

fn unstack_rows(v: &DVector<f64>, q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(q, q, |i, j| v[i * q + j])
}

/// Stage 2: maximizes the summed contrast over all of `Q` under the single
/// orthonormality constraint, then retracts onto the orthogonal group.
///
/// The refined rotation is kept only when the solve succeeds and the joint
/// objective does not drop below the starting value.
pub fn refine_joint(
    q_init: &DMatrix<f64>,
    x_tilde: &Arc<DMatrix<f64>>,
    factory: &ProblemFactory,
    config: &PursuitConfig,
) -> Result<JointResult> {
    let q = q_init.nrows();
    let problem = factory.joint_problem(x_tilde.clone(), q);
    let start = factory.joint_score(q_init, x_tilde);
    let fall_back = |status, trace, raw_residual, reason: String| {
        log::warn!("joint stage rejected: {reason}");
        JointResult {
            q_mat: q_init.clone(),
            trace,
            outcome: JointOutcome::FellBack { status, reason },
            raw_residual,
        }
    };
    let solver = AugLagConfig {
        max_outer: config.joint_max_outer,
        ..config.solver.clone()
    };
    let sol = match solve(&problem, &stack_rows(q_init), &solver) {
        Ok(sol) => sol,
        Err(e) => {
            return Ok(fall_back(
                None,
                SolveTrace::default(),
                f64::NAN,
                format!("solver error: {e}"),
            ))
        }
    };
    let raw_residual = orthonormality_residual(&sol.x_star, q).0;
    if !sol.is_converged() {
        return Ok(fall_back(
            Some(sol.status),
            sol.trace,
            raw_residual,
            format!("solver status {:?}", sol.status),
        ));
    }
    let Some(q_star) = polar_retraction(&unstack_rows(&sol.x_star, q)) else {
        return Ok(fall_back(
            Some(sol.status),
            sol.trace,
            raw_residual,
            "singular iterate".into(),
        ));
    };
    let end = factory.joint_score(&q_star, x_tilde);
    if end < start - JOINT_GUARD {
        return Ok(fall_back(
            Some(sol.status),
            sol.trace,
            raw_residual,
            format!("joint objective fell from {start:.6e} to {end:.6e}"),
        ));
    }
    Ok(JointResult {
        q_mat: q_star,
        trace: sol.trace,
        outcome: JointOutcome::Accepted { status: sol.status },
        raw_residual,
    })
}

fn skewness(row: &[f64]) -> f64 {
    let n = row.len() as f64;
    let m = row.iter().sum::<f64>() / n;
    let m2 = row.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = row.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Flips rows of `Q` so each source has positive skewness, or, when the
/// skewness vanishes, a positive largest-magnitude entry.
pub fn normalize_signs(q_mat: &mut DMatrix<f64>, x_tilde: &DMatrix<f64>) {
    let s = &*q_mat * x_tilde;
    for k in 0..q_mat.nrows() {
        let row: Vec<f64> = s.row(k).iter().copied().collect();
        let sk = skewness(&row);
        let flip = if sk.abs() > 1e-12 {
            sk < 0.0
        } else {
            let peak = row
                .iter()
                .copied()
                .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            peak < 0.0
        };
        if flip {
            q_mat.row_mut(k).neg_mut();
        }
    }
}

/// Runs all stages on whitened data (`q x n`).
pub fn pursue(
    x_tilde: DMatrix<f64>,
    factory: &ProblemFactory,
    config: &PursuitConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PursuitResult> {
    config.validate()?;
    let q = x_tilde.nrows();
    let x_tilde = Arc::new(x_tilde);
    let mut rows: Vec<DVector<f64>> = Vec::with_capacity(q);
    let mut component_traces = Vec::with_capacity(q);
    let mut stage1_objectives = Vec::with_capacity(q);
    for k in 1..=q {
        let comp = extract_component(k, &rows, &x_tilde, factory, config, rng)
            .map_err(|e| e.at("stage1"))?;
        if comp.failed_seeds > 0 {
            log::info!(
                "component {k}: {} of the retained seeds did not converge",
                comp.failed_seeds
            );
        }
        stage1_objectives.push(comp.objective);
        component_traces.push(comp.trace);
        rows.push(comp.w);
    }
    let stage1_q = DMatrix::from_fn(q, q, |i, j| rows[i][j]);

    let (mut q_mat, joint_trace, joint_outcome) = if config.run_stage2 {
        let joint =
            refine_joint(&stage1_q, &x_tilde, factory, config).map_err(|e| e.at("stage2"))?;
        (joint.q_mat, Some(joint.trace), joint.outcome)
    } else {
        (stage1_q.clone(), None, JointOutcome::Skipped)
    };
    normalize_signs(&mut q_mat, &x_tilde);
    let stage2_objectives = q_mat
        .row_iter()
        .map(|r| factory.score(&r.transpose(), &x_tilde).0)
        .collect();
    let s_hat = &q_mat * x_tilde.as_ref();
    Ok(PursuitResult {
        q_mat,
        s_hat,
        component_traces,
        joint_trace,
        joint_outcome,
        stage1_objectives,
        stage2_objectives,
        stage1_q,
    })
}
