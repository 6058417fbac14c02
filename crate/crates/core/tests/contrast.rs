use std::sync::Arc;

use adis_core::contrast::{
    g_logcosh, gauss_expectation, gauss_expectation_with, orthonormality_residual, BHook,
};
use adis_core::{
    compose, ConstraintSet, ContrastFn, Negentropy, ProblemFactory, ProjectionConstraint,
};
use adis_nlp::gradcheck::audit_gradients;
use adis_nlp::{solve, AugLagConfig, NlpError};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

/// `log cosh 1` to 40 digits.
const LOGCOSH_ONE: f64 = 0.433_780_830_483_027_187_026_494_684_900_127_863_4;

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Rows of mixed shape: uniform, Laplacian and Gaussian, unit variance.
fn non_gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, _| match i % 3 {
        0 => rng.random_range(-3f64.sqrt()..3f64.sqrt()),
        1 => (rng.sample::<f64, _>(Exp1) - rng.sample::<f64, _>(Exp1)) / 2f64.sqrt(),
        _ => rng.sample(StandardNormal),
    })
}

/// Trapezoid rule on [-40, 40]; exponentially accurate for this integrand.
fn trapezoid_expectation() -> f64 {
    let h = 1e-3;
    let steps = (80.0 / h) as usize;
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (0..=steps)
        .map(|k| {
            let x = -40.0 + k as f64 * h;
            let wgt = if k == 0 || k == steps { 0.5 } else { 1.0 };
            wgt * g_logcosh(x).0 * density(x)
        })
        .sum::<f64>()
        * h
}

fn central_difference(c: &dyn ContrastFn, w: &DVector<f64>, x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(w.len(), |i, _| {
        let h = 1e-6 * (1.0 + w[i].abs());
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp[i] += h;
        wm[i] -= h;
        (c.evaluate(&wp, x).0 - c.evaluate(&wm, x).0) / (2.0 * h)
    })
}

#[test]
fn logcosh_edge_values() {
    assert_eq!(g_logcosh(0.0), (0.0, 0.0));
    let (v, d) = g_logcosh(700.0);
    assert!((v - (700.0 - std::f64::consts::LN_2)).abs() <= 1e-12);
    assert_eq!(d, 1.0);
    let (v, d) = g_logcosh(-700.0);
    assert!((v - (700.0 - std::f64::consts::LN_2)).abs() <= 1e-12);
    assert_eq!(d, -1.0);
    let (v, _) = g_logcosh(1.0);
    assert!((v - LOGCOSH_ONE).abs() <= 1e-15, "{v}");
}

#[test]
fn gaussian_constant_is_stable_and_matches_oracles() {
    let c = gauss_expectation();
    assert!(c > 0.0);
    for n in [60, 80, 100, 200, 400] {
        assert!((gauss_expectation_with(n) - c).abs() <= 1e-12, "{n} nodes");
    }
    let oracle = trapezoid_expectation();
    assert!((c - oracle).abs() <= 1e-10, "{c} vs {oracle}");
    assert!((c - 0.374_567_207_491_438).abs() <= 1e-12);
}

#[test]
fn gaussian_constant_agrees_with_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 10_000_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let g = g_logcosh(rng.sample(StandardNormal)).0;
        sum += g;
        sum_sq += g * g;
    }
    let mean = sum / n as f64;
    let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
    assert!(
        (mean - gauss_expectation()).abs() <= 3.0 * se,
        "{mean} +- {se}"
    );
}

#[test]
fn gaussian_projections_have_vanishing_negentropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = gaussian(3, 1_000_000, &mut rng);
    let w = DVector::from_vec(vec![0.6, -0.0, 0.8]);
    let (j, _) = Negentropy::default().evaluate(&w, &x);
    assert!(j <= 1e-4, "{j}");
}

#[test]
fn zero_projection_gives_squared_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = non_gaussian(4, 50, &mut rng);
    let c = gauss_expectation();
    let (j, g) = Negentropy::default().evaluate(&DVector::zeros(4), &x);
    assert_eq!(j, c * c);
    assert_eq!(g, DVector::zeros(4));
}

#[test]
fn negentropy_matches_its_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = non_gaussian(3, 200, &mut rng);
    let w = DVector::from_vec(vec![0.3, -1.1, 0.5]);
    let ys: Vec<f64> = (0..200).map(|i| x.column(i).dot(&w)).collect();
    let m = ys.iter().map(|y| y.cosh().ln()).sum::<f64>() / 200.0;
    let gap = m - gauss_expectation();
    let mut grad = DVector::zeros(3);
    for (i, y) in ys.iter().enumerate() {
        grad += x.column(i) * y.tanh();
    }
    grad *= 2.0 * gap / 200.0;
    let (j, g) = Negentropy::default().evaluate(&w, &x);
    assert!((j - gap * gap).abs() <= 1e-14);
    assert!((g - grad).amax() <= 1e-14);
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let contrast = Negentropy::default();
    for trial in 0..20 {
        let r = 1 + trial % 8;
        let n = rng.random_range(20..400);
        let x = non_gaussian(r, n, &mut rng) * rng.random_range(0.5..2.0);
        let w = DVector::from_fn(r, |_, _| rng.random_range(-1.5..1.5));
        let (_, g) = contrast.evaluate(&w, &x);
        let fd = central_difference(&contrast, &w, &x);
        let rel = (&g - &fd).amax() / g.amax().max(1e-300);
        assert!(rel <= 1e-5, "trial {trial}: r = {r}, rel err {rel}");
    }
}

#[test]
fn negentropy_is_even_in_the_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let x = non_gaussian(5, 137, &mut rng);
        let w = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
        let (jp, gp) = Negentropy::default().evaluate(&w, &x);
        let (jm, gm) = Negentropy::default().evaluate(&-&w, &x);
        assert_eq!(jp, jm);
        assert_eq!(gp, -gm);
    }
}

#[test]
fn plain_factory_objective_is_negated_negentropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = Arc::new(non_gaussian(3, 100, &mut rng));
    let problem = ProblemFactory::negentropy().projection_problem(x.clone());
    assert_eq!(problem.eq_count(), 0);
    assert_eq!(problem.ineq_count(), 0);
    let w = DVector::from_vec(vec![0.2, 0.9, -0.4]);
    let (v, g) = problem.objective(&w).unwrap();
    let (j, jg) = Negentropy::default().evaluate(&w, &x);
    assert_eq!(v, -j);
    assert_eq!(g, -jg);
}

#[test]
fn constant_hook_shifts_value_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let x = Arc::new(non_gaussian(3, 100, &mut rng));
    let kappa = 0.37;
    let hook: BHook =
        Arc::new(move |w: &DVector<f64>, _: &DMatrix<f64>| (kappa, DVector::zeros(w.len())));
    let plain = ProblemFactory::negentropy().projection_problem(x.clone());
    let hooked = compose(
        Arc::new(Negentropy::default()),
        Some(hook),
        ConstraintSet::default(),
    )
    .projection_problem(x);
    let w = DVector::from_vec(vec![-0.5, 0.1, 0.8]);
    let (v0, g0) = plain.objective(&w).unwrap();
    let (v1, g1) = hooked.objective(&w).unwrap();
    assert!((v1 - (v0 - kappa)).abs() <= 1e-15);
    assert_eq!(g0, g1);
}

/// `mean |w^T x_i| - t` with gradient `mean sign(w^T x_i) x_i`.
fn mean_abs_constraint(t: f64) -> ProjectionConstraint {
    ProjectionConstraint::new(1, move |w: &DVector<f64>, x: &DMatrix<f64>| {
        let n = x.ncols() as f64;
        let proj = x.tr_mul(w);
        let value = proj.abs().sum() / n - t;
        let signs = proj.map(f64::signum);
        let grad = DMatrix::from_row_slice(1, w.len(), (x * signs / n).as_slice());
        (DVector::from_element(1, value), grad)
    })
}

#[test]
fn user_equality_is_enforced_by_the_solver() {
    // Standardized uniform and Laplacian rows: mean |y| is sqrt(3)/2 along the
    // first axis and 1/sqrt(2) along the second, so t = 0.78 is attainable.
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let x = Arc::new(non_gaussian(2, 2000, &mut rng));
    let t = 0.78;
    let factory = compose(
        Arc::new(Negentropy::default()),
        None,
        ConstraintSet {
            equalities: Some(mean_abs_constraint(t)),
            inequalities: None,
        },
    );
    let problem = factory.component_problem(x.clone(), DMatrix::identity(2, 2));
    assert_eq!(problem.eq_count(), 2);
    let x0 = DVector::from_vec(vec![0.8, 0.6]);
    let sol = solve(&problem, &x0, &AugLagConfig::default()).unwrap();
    assert!(sol.is_converged(), "{:?}", sol.status);
    let w = &sol.x_star;
    let violation = (x.tr_mul(w).abs().sum() / 2000.0 - t).abs();
    assert!(violation <= 1e-6, "{violation}");
    assert!((w.norm() - 1.0).abs() <= 1e-6);
}

#[test]
fn composed_problems_pass_a_gradient_audit() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let x = Arc::new(non_gaussian(4, 300, &mut rng));
    let hook: BHook = Arc::new(|w: &DVector<f64>, _: &DMatrix<f64>| {
        (0.1 * w[0].powi(3), {
            let mut g = DVector::zeros(w.len());
            g[0] = 0.3 * w[0] * w[0];
            g
        })
    });
    let ineq = ProjectionConstraint::new(1, |w: &DVector<f64>, x: &DMatrix<f64>| {
        let n = x.ncols() as f64;
        let proj = x.tr_mul(w);
        let mean_sq = proj.norm_squared() / n;
        let grad = DMatrix::from_row_slice(1, w.len(), (x * &proj * (-2.0 / n)).as_slice());
        (DVector::from_element(1, 1.5 - mean_sq), grad)
    });
    let factory = compose(
        Arc::new(Negentropy::default()),
        Some(hook),
        ConstraintSet {
            equalities: Some(mean_abs_constraint(0.7)),
            inequalities: Some(ineq),
        },
    );
    let basis = DMatrix::from_fn(4, 3, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
    let z = DVector::from_vec(vec![0.3, -0.7, 0.5]);
    let audit = audit_gradients(&factory.component_problem(x.clone(), basis), &z).unwrap();
    assert!(audit.worst() <= 1e-5, "{audit:?}");
    let v = DVector::from_fn(16, |_, _| rng.random_range(-1.0..1.0));
    let audit = audit_gradients(&factory.joint_problem(x, 4), &v).unwrap();
    assert!(audit.worst() <= 1e-5, "{audit:?}");
}

#[test]
fn orthonormality_residual_vanishes_on_rotations() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let q = gaussian(3, 3, &mut rng).qr().q();
    let v = DVector::from_iterator(9, q.transpose().iter().copied());
    let (value, grad) = orthonormality_residual(&v, 3);
    assert!(value < 1e-28);
    assert!(grad.amax() < 1e-13);
    let (value, _) = orthonormality_residual(&(v * 1.1), 3);
    // Three diagonal deviations of 0.21 each.
    assert!((value - 3.0 * 0.21f64.powi(2)).abs() < 1e-12);
}

#[test]
fn mismatched_constraint_fails_at_first_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let x = Arc::new(non_gaussian(2, 50, &mut rng));
    let bad = ProjectionConstraint::new(2, |w: &DVector<f64>, _: &DMatrix<f64>| {
        (DVector::zeros(1), DMatrix::zeros(1, w.len()))
    });
    let factory = compose(
        Arc::new(Negentropy::default()),
        None,
        ConstraintSet {
            equalities: Some(bad),
            inequalities: None,
        },
    );
    let problem = factory.component_problem(x, DMatrix::identity(2, 2));
    let err = solve(
        &problem,
        &DVector::from_vec(vec![1.0, 0.0]),
        &AugLagConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, NlpError::DimensionMismatch { .. }), "{err}");
}
