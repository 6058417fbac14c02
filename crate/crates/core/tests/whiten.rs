use adis_core::whiten::{
    center, covariance_eigen, fit_ppca, fit_ppca_with, source_stats, WhitenConfig,
};
use adis_core::{CoreError, DataMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_orthogonal(q: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    gaussian(q, q, rng).qr().q()
}

/// `x = A s + sigma eta` with uniform (0, 1) mixing and Gaussian sources.
fn generative(p: usize, q: usize, n: usize, sigma: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(p, q, |_, _| rng.random_range(0.0..1.0)) * 3.0;
    let s = gaussian(q, n, &mut rng);
    let eta = gaussian(p, n, &mut rng);
    a * s + eta * sigma
}

fn sample_cov(x: &DMatrix<f64>) -> DMatrix<f64> {
    x * x.transpose() / x.ncols() as f64
}

#[test]
fn centered_random_matrix_has_zero_channel_sums_and_row_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let raw = DMatrix::from_fn(5, 100, |_, _| rng.random_range(-10.0..10.0));
    let (x, mu) = center(&DataMatrix::new(raw.clone()).unwrap());
    for j in 0..100 {
        assert!(x.column(j).sum().abs() <= 1e-10);
    }
    for i in 0..5 {
        assert!(x.row(i).mean().abs() <= 1e-10);
    }
    // Direct recomputation: subtract column means then row means of the result.
    let mut oracle = raw.clone();
    for j in 0..100 {
        let m: f64 = (0..5).map(|i| raw[(i, j)]).sum::<f64>() / 5.0;
        for i in 0..5 {
            oracle[(i, j)] -= m;
        }
    }
    for i in 0..5 {
        let m: f64 = (0..100).map(|j| oracle[(i, j)]).sum::<f64>() / 100.0;
        assert!((mu[i] - m).abs() < 1e-12);
        for j in 0..100 {
            oracle[(i, j)] -= m;
        }
    }
    assert!((&x - &oracle).amax() < 1e-12);
}

#[test]
fn doubly_centered_input_is_a_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let raw = gaussian(6, 40, &mut rng);
    let (once, _) = center(&DataMatrix::new(raw).unwrap());
    let (twice, mu) = center(&DataMatrix::new(once.clone()).unwrap());
    assert!((&twice - &once).amax() < 1e-12);
    assert!(mu.amax() < 1e-12);
}

#[test]
fn eigen_decomposition_is_sorted_and_reconstructs() {
    let x = generative(12, 3, 500, 0.5, 3);
    let (vals, vecs) = covariance_eigen(&x);
    for w in vals.as_slice().windows(2) {
        assert!(w[0] >= w[1]);
    }
    let cov = sample_cov(&x);
    let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
    assert!((&cov - rebuilt).norm() <= 1e-8 * cov.norm());
}

#[test]
fn noiseless_rank_q_data_has_zero_noise_floor_and_white_coordinates() {
    let x = generative(10, 3, 5000, 0.0, 4);
    let model = fit_ppca(&DataMatrix::new(x).unwrap(), 3).unwrap();
    assert!(model.sigma2_hat <= 1e-10, "{}", model.sigma2_hat);
    assert!(model.clipped.is_empty());
    let cov = sample_cov(&model.x_tilde);
    assert!((cov - DMatrix::identity(3, 3)).amax() <= 1e-8);
}

#[test]
fn square_mode_whitens_a_full_rank_mixture() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = DMatrix::from_fn(4, 3000, |_, _| rng.random_range(-1.0..1.0));
    let a = gaussian(4, 4, &mut rng);
    let config = WhitenConfig {
        channel_center: false,
        ..Default::default()
    };
    let model = fit_ppca_with(&DataMatrix::new(a * s).unwrap(), 4, &config).unwrap();
    assert_eq!(model.sigma2_hat, 0.0);
    let cov = sample_cov(&model.x_tilde);
    assert!((cov - DMatrix::identity(4, 4)).amax() <= 1e-8);
}

#[test]
fn noisy_whitened_covariance_matches_closed_form() {
    // With a positive noise floor the coordinates have variance
    // lambda_k / (lambda_k - sigma2) on the diagonal and zero elsewhere.
    let x = generative(15, 4, 4000, 1.0, 6);
    let model = fit_ppca(&DataMatrix::new(x).unwrap(), 4).unwrap();
    assert!(model.sigma2_hat > 0.5);
    let cov = sample_cov(&model.x_tilde);
    for i in 0..4 {
        for j in 0..4 {
            let expected = if i == j {
                model.eigvals[i] / (model.eigvals[i] - model.sigma2_hat)
            } else {
                0.0
            };
            assert!(
                (cov[(i, j)] - expected).abs() <= 1e-8,
                "({i},{j}) {} vs {expected}",
                cov[(i, j)]
            );
        }
    }
}

#[test]
fn noise_floor_is_the_mean_of_the_inner_tail() {
    let x = generative(9, 2, 800, 0.7, 7);
    let model = fit_ppca(&DataMatrix::new(x).unwrap(), 2).unwrap();
    let tail: f64 = (2..8).map(|i| model.eigvals[i]).sum::<f64>() / 6.0;
    assert!((model.sigma2_hat - tail).abs() < 1e-14);
}

#[test]
fn tail_spectrum_matches_the_noise_variance() {
    let (p, q) = (50, 5);
    let x = generative(p, q, 10_000, 1.0, 8);
    let model = fit_ppca(&DataMatrix::new(x).unwrap(), q).unwrap();
    let tail = model.eigvals.rows(q, p - 1 - q);
    assert!(
        (tail.mean() - 1.0).abs() <= 0.05,
        "tail mean {}",
        tail.mean()
    );
    assert!(
        model.eigvals[p - 1].abs() <= 1e-10,
        "last eigenvalue {}",
        model.eigvals[p - 1]
    );
    assert!((model.sigma2_hat - 1.0).abs() <= 0.05);
}

#[test]
fn noise_floor_estimator_is_unbiased_over_replicates() {
    let sigma2: f64 = 0.64;
    let mean: f64 = (0..50)
        .map(|r| {
            let x = generative(50, 5, 10_000, sigma2.sqrt(), 100 + r);
            fit_ppca(&DataMatrix::new(x).unwrap(), 5)
                .unwrap()
                .sigma2_hat
        })
        .sum::<f64>()
        / 50.0;
    assert!((mean - sigma2).abs() <= 0.05 * sigma2, "mean {mean}");
}

#[test]
fn rotation_leaves_mixing_outer_product_unchanged() {
    let x = generative(8, 3, 600, 0.3, 9);
    let model = fit_ppca(&DataMatrix::new(x).unwrap(), 3).unwrap();
    let base = &model.a_hat * model.a_hat.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10 {
        let q = random_orthogonal(3, &mut rng);
        let a = model.mixing(&q);
        assert!((&a * a.transpose() - &base).amax() <= 1e-10 * base.amax());
    }
}

#[test]
fn least_squares_sources_equal_rotated_whitened_data() {
    let x = generative(8, 3, 600, 0.3, 11);
    let (centered, _) = center(&DataMatrix::new(x.clone()).unwrap());
    let model = fit_ppca(&DataMatrix::new(x).unwrap(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let q = random_orthogonal(3, &mut rng);
    let s = model.least_squares_sources(&centered, &q).unwrap();
    let expected = &q * &model.x_tilde;
    assert!((s - &expected).amax() <= 1e-10 * expected.amax());
}

#[test]
fn strict_mode_names_the_offending_index() {
    // Equal eigenvalues everywhere: lambda_q equals the floor exactly.
    let p = 6;
    let n = 6 * 50;
    let mut x = DMatrix::zeros(p, n);
    // Columns cycle through the centered basis vectors with alternating sign,
    // giving an isotropic covariance on the centered subspace.
    for j in 0..n {
        let k = j % p;
        let sign = if (j / p) % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..p {
            x[(i, j)] = sign
                * if i == k {
                    1.0 - 1.0 / p as f64
                } else {
                    -1.0 / p as f64
                };
        }
    }
    let data = DataMatrix::new(x).unwrap();
    let strict = WhitenConfig {
        strict: true,
        ..Default::default()
    };
    match fit_ppca_with(&data, 2, &strict) {
        Err(CoreError::DegenerateSpectrum { index, .. }) => assert_eq!(index, 1),
        other => panic!("expected a degenerate spectrum error, got {other:?}"),
    }
    let relaxed = fit_ppca(&data, 2).unwrap();
    assert_eq!(relaxed.clipped, vec![0, 1]);
    assert!(relaxed.x_tilde.iter().all(|v| v.is_finite()));
}

#[test]
fn exact_reconstruction_has_zero_residual_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let a = gaussian(6, 2, &mut rng);
    let s = gaussian(2, 50, &mut rng);
    let stats = source_stats(&a, &(&a * &s), &s).unwrap();
    assert!(stats.sigma2_i.amax() < 1e-24);
    assert!(stats.cov_s(7).amax() < 1e-20);
}

#[test]
fn single_component_relative_variance_is_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let a = gaussian(5, 1, &mut rng);
    let s = gaussian(1, 30, &mut rng);
    let x = &a * &s + gaussian(5, 30, &mut rng) * 0.1;
    let stats = source_stats(&a, &x, &s).unwrap();
    assert!(stats.rv.iter().all(|&v| (v - 1.0).abs() < 1e-15));
}

#[test]
fn two_source_statistics_match_direct_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let (p, n) = (7, 25);
    let a = gaussian(p, 2, &mut rng);
    let s = gaussian(2, n, &mut rng);
    let x = &a * &s + gaussian(p, n, &mut rng) * 0.2;
    let stats = source_stats(&a, &x, &s).unwrap();

    let var = |k: usize| {
        let m: f64 = (0..p).map(|i| a[(i, k)]).sum::<f64>() / p as f64;
        (0..p).map(|i| (a[(i, k)] - m).powi(2)).sum::<f64>() / (p - 1) as f64
    };
    let (v0, v1) = (var(0), var(1));
    let inv = (a.transpose() * &a).try_inverse().unwrap();
    for i in 0..n {
        let d = v0 * s[(0, i)].powi(2) + v1 * s[(1, i)].powi(2);
        assert!((stats.rv[(0, i)] - v0 * s[(0, i)].powi(2) / d).abs() < 1e-12);
        assert!((stats.rv[(1, i)] - v1 * s[(1, i)].powi(2) / d).abs() < 1e-12);
        assert!((stats.rv.column(i).sum() - 1.0).abs() < 1e-10);
        let r: DVector<f64> = x.column(i) - &a * s.column(i);
        let s2 = r.norm_squared() / (p - 2) as f64;
        assert!((stats.sigma2_i[i] - s2).abs() < 1e-12);
        assert!((stats.cov_s(i) - &inv * s2).amax() < 1e-12);
    }
}

#[test]
fn square_statistics_are_rejected() {
    let a = DMatrix::<f64>::identity(3, 3);
    let s = DMatrix::from_element(3, 4, 1.0);
    assert!(matches!(
        source_stats(&a, &s, &s),
        Err(CoreError::InvalidArgument(_))
    ));
}
