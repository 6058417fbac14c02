use adis_bench::mixing::{gen_mixing, is_full_rank, MixingFamily, MixingSpec, ILL_CONDITION};
use nalgebra::DMatrix;

fn gen(family: MixingFamily, dim: usize, seed: u64) -> DMatrix<f64> {
    gen_mixing(&MixingSpec::new(family, dim, seed)).unwrap()
}

fn cond(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    sv.max() / sv.min()
}

#[test]
fn hilbert_of_order_three() {
    let h = gen(MixingFamily::Hilbert, 3, 0);
    let expected = DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0,
            0.5,
            1.0 / 3.0,
            0.5,
            1.0 / 3.0,
            0.25,
            1.0 / 3.0,
            0.25,
            0.2,
        ],
    );
    assert_eq!(h, expected);
}

#[test]
fn orthogonal_family_is_orthogonal() {
    for seed in 0..10 {
        let a = gen(MixingFamily::Orthogonal, 7, seed);
        assert!((a.tr_mul(&a) - DMatrix::identity(7, 7)).amax() <= 1e-10);
    }
}

#[test]
fn ill_conditioned_family_hits_its_target() {
    for seed in 0..10 {
        let c = cond(&gen(MixingFamily::IllConditionedRandom, 6, seed));
        assert!(
            (0.5 * ILL_CONDITION..=2.0 * ILL_CONDITION).contains(&c),
            "cond {c}"
        );
    }
}

#[test]
fn structural_properties_hold_exactly() {
    let q = 6;
    for seed in 0..5 {
        for family in [
            MixingFamily::SymmetricRandom,
            MixingFamily::NonnegativeSymmetric,
            MixingFamily::BipolarSymmetric,
        ] {
            let a = gen(family, q, seed);
            assert_eq!(a, a.transpose(), "{family:?}");
        }
        let skew = gen(MixingFamily::SkewSymmetric, q, seed);
        assert_eq!(skew, -skew.transpose());
        assert!(gen(MixingFamily::NonnegativeSymmetric, q, seed)
            .iter()
            .all(|&v| v >= 0.0));
        assert!(gen(MixingFamily::UniformRandom, q, seed)
            .iter()
            .all(|&v| (0.0..1.0).contains(&v)));
        for family in [MixingFamily::RandomBipolar, MixingFamily::BipolarSymmetric] {
            assert!(gen(family, q, seed).iter().all(|&v| v == 1.0 || v == -1.0));
        }
        let t = gen(MixingFamily::Toeplitz, q, seed);
        let h = gen(MixingFamily::Hankel, q, seed);
        for i in 1..q {
            for j in 1..q {
                assert_eq!(t[(i, j)], t[(i - 1, j - 1)]);
                assert_eq!(h[(i, j - 1)], h[(i - 1, j)]);
            }
        }
    }
}

#[test]
fn sparse_family_is_sparse_and_full_rank() {
    let q = 30;
    let mut nonzero = 0;
    for seed in 0..10 {
        let a = gen(MixingFamily::RandomSparse, q, seed);
        assert!(is_full_rank(&a));
        nonzero += a.iter().filter(|&&v| v != 0.0).count();
    }
    // A permutation support plus density 0.2 elsewhere.
    let expected = 10.0 * (q as f64 + 0.2 * (q * q - q) as f64);
    let frac = nonzero as f64 / expected;
    assert!((0.9..1.1).contains(&frac), "nonzero fraction {frac}");
}

#[test]
fn every_family_is_deterministic_and_full_rank() {
    for family in MixingFamily::ALL {
        for seed in 0..5 {
            let a = gen(family, 6, seed);
            assert_eq!(a, gen(family, 6, seed), "{family:?}");
            assert_eq!(a.shape(), (6, 6));
            assert!(is_full_rank(&a), "{family:?} seed {seed}");
        }
    }
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(gen_mixing(&MixingSpec::new(MixingFamily::SkewSymmetric, 5, 0)).is_err());
    assert!(gen_mixing(&MixingSpec::new(MixingFamily::UniformRandom, 0, 0)).is_err());
}
