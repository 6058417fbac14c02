//! Square mixing-matrix families for separation benchmarks.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const SPARSE_DENSITY: f64 = 0.2;
pub const ILL_CONDITION: f64 = 1e4;
const MAX_ATTEMPTS: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingFamily {
    UniformRandom,
    RandomSparse,
    RandomBipolar,
    SymmetricRandom,
    IllConditionedRandom,
    Hilbert,
    Toeplitz,
    Hankel,
    Orthogonal,
    NonnegativeSymmetric,
    BipolarSymmetric,
    SkewSymmetric,
}

impl MixingFamily {
    pub const ALL: [MixingFamily; 12] = [
        MixingFamily::UniformRandom,
        MixingFamily::RandomSparse,
        MixingFamily::RandomBipolar,
        MixingFamily::SymmetricRandom,
        MixingFamily::IllConditionedRandom,
        MixingFamily::Hilbert,
        MixingFamily::Toeplitz,
        MixingFamily::Hankel,
        MixingFamily::Orthogonal,
        MixingFamily::NonnegativeSymmetric,
        MixingFamily::BipolarSymmetric,
        MixingFamily::SkewSymmetric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MixingFamily::UniformRandom => "uniform-random",
            MixingFamily::RandomSparse => "random-sparse",
            MixingFamily::RandomBipolar => "random-bipolar",
            MixingFamily::SymmetricRandom => "symmetric-random",
            MixingFamily::IllConditionedRandom => "ill-conditioned-random",
            MixingFamily::Hilbert => "hilbert",
            MixingFamily::Toeplitz => "toeplitz",
            MixingFamily::Hankel => "hankel",
            MixingFamily::Orthogonal => "orthogonal",
            MixingFamily::NonnegativeSymmetric => "nonnegative-symmetric",
            MixingFamily::BipolarSymmetric => "bipolar-symmetric",
            MixingFamily::SkewSymmetric => "skew-symmetric",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingSpec {
    pub family: MixingFamily,
    pub dim: usize,
    pub seed: u64,
}

impl MixingSpec {
    pub fn new(family: MixingFamily, dim: usize, seed: u64) -> Self {
        Self { family, dim, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(BenchError::InvalidSpec(
                "mixing dimension must be positive".into(),
            ));
        }
        if self.family == MixingFamily::SkewSymmetric && self.dim % 2 == 1 {
            return Err(BenchError::InvalidSpec(format!(
                "skew-symmetric matrices of odd order {} are singular",
                self.dim
            )));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, q: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(q, q, |_, _| rng.random_range(lo..hi))
}

fn bipolar(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

fn gaussian(rng: &mut ChaCha8Rng, q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(q, q, |_, _| rng.sample(StandardNormal))
}

fn symmetrize_upper(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if i <= j {
            m[(i, j)]
        } else {
            m[(j, i)]
        }
    })
}

/// Orthogonal factor of a Gaussian matrix, signs fixed so `R` has a
/// positive diagonal (Haar distributed).
fn haar_orthogonal(rng: &mut ChaCha8Rng, q: usize) -> DMatrix<f64> {
    let qr = gaussian(rng, q).qr();
    let r = qr.r();
    let mut qm = qr.q();
    for k in 0..q {
        if r[(k, k)] < 0.0 {
            qm.column_mut(k).neg_mut();
        }
    }
    qm
}

fn build(family: MixingFamily, q: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    match family {
        MixingFamily::UniformRandom => uniform(rng, q, 0.0, 1.0),
        MixingFamily::RandomSparse => {
            // A random permutation pattern keeps the support structurally
            // nonsingular; the remaining entries are filled at the density.
            let mut perm: Vec<usize> = (0..q).collect();
            perm.shuffle(rng);
            let mut a = DMatrix::zeros(q, q);
            for i in 0..q {
                for j in 0..q {
                    if perm[i] == j || rng.random_bool(SPARSE_DENSITY) {
                        a[(i, j)] = rng.random_range(-1.0..1.0);
                    }
                }
            }
            a
        }
        MixingFamily::RandomBipolar => DMatrix::from_fn(q, q, |_, _| bipolar(rng)),
        MixingFamily::SymmetricRandom => symmetrize_upper(&uniform(rng, q, -1.0, 1.0)),
        MixingFamily::IllConditionedRandom => {
            let u = haar_orthogonal(rng, q);
            let v = haar_orthogonal(rng, q);
            let sv = nalgebra::DVector::from_fn(q, |k, _| {
                if q == 1 {
                    1.0
                } else {
                    ILL_CONDITION.powf(-(k as f64) / (q - 1) as f64)
                }
            });
            u * DMatrix::from_diagonal(&sv) * v.transpose()
        }
        MixingFamily::Hilbert => DMatrix::from_fn(q, q, |i, j| 1.0 / (i + j + 1) as f64),
        MixingFamily::Toeplitz => {
            let diag: Vec<f64> = (0..2 * q - 1)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            DMatrix::from_fn(q, q, |i, j| diag[q - 1 + j - i])
        }
        MixingFamily::Hankel => {
            let anti: Vec<f64> = (0..2 * q - 1)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            DMatrix::from_fn(q, q, |i, j| anti[i + j])
        }
        MixingFamily::Orthogonal => haar_orthogonal(rng, q),
        MixingFamily::NonnegativeSymmetric => symmetrize_upper(&uniform(rng, q, 0.0, 1.0)),
        MixingFamily::BipolarSymmetric => {
            symmetrize_upper(&DMatrix::from_fn(q, q, |_, _| bipolar(rng)))
        }
        MixingFamily::SkewSymmetric => {
            let b = uniform(rng, q, -1.0, 1.0);
            DMatrix::from_fn(q, q, |i, j| {
                if i < j {
                    b[(i, j)]
                } else if i > j {
                    -b[(j, i)]
                } else {
                    0.0
                }
            })
        }
    }
}

/// Numerically full rank: smallest singular value above `q * eps * largest`.
pub fn is_full_rank(a: &DMatrix<f64>) -> bool {
    let sv = a.singular_values();
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * sv.max();
    sv.min() > tol
}

/// Generates a mixing matrix, retrying with `seed + 1, seed + 2, ...` on
/// rank deficiency.
pub fn gen_mixing(spec: &MixingSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(attempt));
        let a = build(spec.family, spec.dim, &mut rng);
        if is_full_rank(&a) {
            return Ok(a);
        }
        log::debug!(
            "{} mixing with seed {} is rank deficient",
            spec.family.name(),
            spec.seed.wrapping_add(attempt)
        );
    }
    Err(BenchError::InvalidSpec(format!(
        "no full-rank {} matrix of order {} in {MAX_ATTEMPTS} attempts",
        spec.family.name(),
        spec.dim
    )))
}
