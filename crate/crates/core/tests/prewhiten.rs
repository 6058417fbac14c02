use adis_core::prewhiten::{ar_filter, autocovariance, prewhiten_iterate, yule_walker};
use adis_core::{CoreError, DataMatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut prev = 0.0;
    for _ in 0..n {
        let e: f64 = rng.sample(StandardNormal);
        prev = phi * prev + e;
        out.push(prev);
    }
    out
}

fn data(seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DataMatrix::new(DMatrix::from_fn(3, 200, |_, _| rng.sample(StandardNormal))).unwrap()
}

#[test]
fn ar1_coefficient_is_recovered() {
    let series = ar1(0.5, 10_000, 1);
    let phi = yule_walker(&series, 1).unwrap();
    assert!((phi[0] - 0.5).abs() <= 0.05, "{}", phi[0]);
    // Order one reduces to r_1 / r_0.
    let r = autocovariance(&series, 1);
    assert!((phi[0] - r[1] / r[0]).abs() < 1e-14);
}

#[test]
fn zero_residuals_leave_data_unchanged_after_one_round() {
    let d = data(2);
    let out = prewhiten_iterate(
        &d,
        |x| Ok(DMatrix::zeros(x.channels(), x.samples())),
        2,
        5,
        1e-6,
    )
    .unwrap();
    assert_eq!(out.rounds, 1);
    assert!((out.data.values() - d.values()).amax() <= 1e-8);
    assert!(out.coefficients.iter().flatten().all(|&c| c == 0.0));
}

#[test]
fn zero_rounds_is_the_identity() {
    let d = data(3);
    let out = prewhiten_iterate(&d, |_| panic!("callback must not run"), 1, 0, 1e-6).unwrap();
    assert_eq!(out.rounds, 0);
    assert_eq!(out.data.values(), d.values());
}

#[test]
fn correlated_residuals_filter_the_original_data() {
    let n = 4000;
    let rows: Vec<Vec<f64>> = (0..2).map(|c| ar1(0.6, n, 10 + c)).collect();
    let x = DMatrix::from_fn(2, n, |i, j| rows[i][j]);
    let d = DataMatrix::new(x.clone()).unwrap();
    // A model that explains nothing: residuals are the data themselves.
    let out = prewhiten_iterate(&d, |_| Ok(x.clone()), 1, 1, 1e-6).unwrap();
    for (ch, row) in rows.iter().enumerate() {
        let phi = &out.coefficients[ch];
        assert!((phi[0] - 0.6).abs() < 0.05);
        let expected = ar_filter(row, phi);
        for (t, v) in expected.iter().enumerate() {
            assert_eq!(out.data.values()[(ch, t)], *v);
        }
        let filtered: Vec<f64> = out.data.values().row(ch).iter().copied().collect();
        let lag1 = yule_walker(&filtered, 1).unwrap()[0];
        assert!(lag1.abs() < 0.05, "channel {ch} still correlated: {lag1}");
    }
}

#[test]
fn undefined_fit_names_the_channel() {
    let d = data(4);
    let err = prewhiten_iterate(
        &d,
        |x| {
            let mut r = DMatrix::zeros(x.channels(), x.samples());
            r[(2, 5)] = f64::INFINITY;
            Ok(r)
        },
        1,
        3,
        1e-6,
    )
    .unwrap_err();
    assert!(matches!(err, CoreError::NonStationary { channel: 2 }));
}

#[test]
fn order_zero_is_rejected() {
    let d = data(5);
    assert!(prewhiten_iterate(&d, |x| Ok(x.values().clone()), 0, 1, 1e-6).is_err());
}
