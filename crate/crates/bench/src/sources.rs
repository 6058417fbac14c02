//! Synthetic source suites standing in for benchmark signal collections.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceSuite {
    /// Sine, square, sawtooth, uniform noise and Laplacian noise.
    Synth5,
    /// Ten sparse signals made of smooth Gaussian bumps.
    SparseBells,
    /// Five narrow-band signals around distinct center frequencies.
    Narrowband,
    /// Four resonant AR(2) signals with on/off envelopes.
    Speech,
}

impl SourceSuite {
    pub const ALL: [SourceSuite; 4] = [
        SourceSuite::Synth5,
        SourceSuite::SparseBells,
        SourceSuite::Narrowband,
        SourceSuite::Speech,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SourceSuite::Synth5 => "synth5",
            SourceSuite::SparseBells => "sparse-bells",
            SourceSuite::Narrowband => "narrowband",
            SourceSuite::Speech => "speech",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn generate(self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        if n < 16 {
            return Err(BenchError::InvalidSpec(format!(
                "need at least 16 samples, got {n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match self {
            SourceSuite::Synth5 => synth5(n, &mut rng),
            SourceSuite::SparseBells => sparse_bells(10, n, &mut rng),
            SourceSuite::Narrowband => narrowband(5, n, &mut rng),
            SourceSuite::Speech => speech(4, n, &mut rng),
        })
    }
}

/// Rows rescaled to zero mean and unit variance.
pub fn standardize(mut s: DMatrix<f64>) -> DMatrix<f64> {
    let n = s.ncols() as f64;
    for mut row in s.row_iter_mut() {
        let m = row.sum() / n;
        row.add_scalar_mut(-m);
        let sd = (row.norm_squared() / n).sqrt();
        if sd > 0.0 {
            row /= sd;
        }
    }
    s
}

fn synth5(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(5, n);
    for t in 0..n {
        let tf = t as f64;
        s[(0, t)] = (2.0 * PI * tf / 97.0).sin();
        s[(1, t)] = if (2.0 * PI * tf / 61.0).sin() >= 0.0 {
            1.0
        } else {
            -1.0
        };
        s[(2, t)] = 2.0 * (tf / 43.0).fract() - 1.0;
        s[(3, t)] = rng.random_range(-1.0..1.0);
        let a: f64 = rng.sample(Exp1);
        let b: f64 = rng.sample(Exp1);
        s[(4, t)] = a - b;
    }
    standardize(s)
}

fn sparse_bells(q: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(q, n);
    let nf = n as f64;
    for k in 0..q {
        let bumps = rng.random_range(1..=3);
        for _ in 0..bumps {
            let center = rng.random_range(0.05..0.95) * nf;
            let width = rng.random_range(0.005..0.02) * nf;
            let height = rng.random_range(0.5..1.5);
            for t in 0..n {
                let z = (t as f64 - center) / width;
                if z.abs() < 8.0 {
                    s[(k, t)] += height * (-0.5 * z * z).exp();
                }
            }
        }
    }
    s
}

fn narrowband(q: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(q, n);
    for k in 0..q {
        let center = 0.02 + 0.06 * k as f64;
        for _ in 0..6 {
            let f = center + rng.random_range(-0.004..0.004);
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = rng.random_range(0.5..1.0);
            for t in 0..n {
                s[(k, t)] += amp * (2.0 * PI * f * t as f64 + phase).cos();
            }
        }
    }
    standardize(s)
}

fn speech(q: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(q, n);
    for k in 0..q {
        // Resonance at a distinct normalized frequency with pole radius 0.95.
        let r = 0.95;
        let w = 2.0 * PI * (0.05 + 0.08 * k as f64);
        let (a1, a2) = (2.0 * r * w.cos(), -r * r);
        let seg = n / 8;
        let mut on = rng.random_bool(0.5);
        let (mut y1, mut y2) = (0.0, 0.0);
        for t in 0..n {
            if seg > 0 && t % seg == 0 {
                on = rng.random_bool(0.6);
            }
            let e: f64 = rng.sample(StandardNormal);
            let y = a1 * y1 + a2 * y2 + if on { e } else { 0.05 * e };
            s[(k, t)] = y;
            y2 = y1;
            y1 = y;
        }
    }
    standardize(s)
}
