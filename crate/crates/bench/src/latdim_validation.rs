//! Bias of the latent-dimension estimate on simulated `x = A s + sigma eta`.
//!
//! `A` is `p x q` with uniform (0, 1) entries rescaled to unit smallest
//! singular value, so `sigma_min(A) / sigma` equals `1 / sigma`.

use adis_core::latdim::estimate_q;
use adis_core::whiten::center;
use adis_core::DataMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::montecarlo::{run_seed, summary_stats};

/// Shape of the gamma sources (excess kurtosis `6 / k = 3`).
pub const GAMMA_SHAPE: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFamily {
    Gaussian,
    Uniform,
    Gamma,
}

impl SourceFamily {
    pub const ALL: [SourceFamily; 3] = [
        SourceFamily::Gaussian,
        SourceFamily::Uniform,
        SourceFamily::Gamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SourceFamily::Gaussian => "gaussian",
            SourceFamily::Uniform => "uniform",
            SourceFamily::Gamma => "gamma",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Zero-mean, unit-variance draw.
    pub fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            SourceFamily::Gaussian => rng.sample(StandardNormal),
            SourceFamily::Uniform => rng.random_range(-3f64.sqrt()..3f64.sqrt()),
            SourceFamily::Gamma => {
                let g = Gamma::new(GAMMA_SHAPE, 1.0).expect("valid gamma parameters");
                (rng.sample(g) - GAMMA_SHAPE) / GAMMA_SHAPE.sqrt()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub families: Vec<SourceFamily>,
    /// Values of `sigma_min(A) / sigma`.
    pub ratios: Vec<f64>,
    /// Values of `q / p`.
    pub q_over_p: Vec<f64>,
    pub p: usize,
    pub n: usize,
    pub reps: usize,
    pub master_seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            families: SourceFamily::ALL.to_vec(),
            ratios: vec![0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
            q_over_p: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            p: 50,
            n: 1000,
            reps: 20,
            master_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub family: SourceFamily,
    pub ratio: f64,
    pub q_true: usize,
    pub q_hats: Vec<usize>,
    pub mean_bias: f64,
    pub std_bias: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub config: GridConfig,
    pub cells: Vec<CellResult>,
}

impl GridReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| BenchError::Report(e.to_string());
        w.write_record([
            "family",
            "ratio",
            "q_true",
            "mean_bias",
            "std_bias",
            "q_hats",
        ])
        .map_err(fail)?;
        for c in &self.cells {
            let hats: Vec<String> = c.q_hats.iter().map(usize::to_string).collect();
            w.write_record([
                c.family.name().to_string(),
                format!("{:?}", c.ratio),
                c.q_true.to_string(),
                format!("{:?}", c.mean_bias),
                format!("{:?}", c.std_bias),
                hats.join(" "),
            ])
            .map_err(fail)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| BenchError::Report(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| BenchError::Report(e.to_string()))
    }
}

/// Uniform (0, 1) `p x q` matrix scaled to `sigma_min = 1`.
pub fn scaled_mixing(p: usize, q: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, q, |_, _| rng.random_range(0.0..1.0));
    let smin = a.singular_values().min();
    a / smin
}

/// One simulated data set: `A s + sigma eta` with `sigma = 1 / ratio`.
pub fn simulate(
    family: SourceFamily,
    p: usize,
    q: usize,
    n: usize,
    ratio: f64,
    seed: u64,
) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = scaled_mixing(p, q, &mut rng);
    let s = DMatrix::from_fn(q, n, |_, _| family.draw(&mut rng));
    let sigma = 1.0 / ratio;
    let noise = DMatrix::from_fn(p, n, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
    a * s + noise
}

/// Estimated dimension of one simulated data set.
pub fn estimate_once(
    family: SourceFamily,
    p: usize,
    q: usize,
    n: usize,
    ratio: f64,
    seed: u64,
) -> Result<usize> {
    let x = simulate(family, p, q, n, ratio, seed);
    let (centered, _) = center(&DataMatrix::new(x)?);
    Ok(estimate_q(&centered, seed)?.q_hat)
}

pub fn latdim_validation(config: &GridConfig) -> Result<GridReport> {
    if config.p < 8 || config.n < 2 || config.reps == 0 {
        return Err(BenchError::InvalidSpec(format!(
            "grid needs p >= 8, n >= 2, reps >= 1 (p = {}, n = {}, reps = {})",
            config.p, config.n, config.reps
        )));
    }
    let mut cells = Vec::new();
    for &family in &config.families {
        for &ratio in &config.ratios {
            for &qp in &config.q_over_p {
                let q = ((qp * config.p as f64).round() as usize).max(1);
                cells.push((family, ratio, q));
            }
        }
    }
    let reps = config.reps;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..reps).map(move |r| (c, r)))
        .collect();
    let hats: Vec<Result<usize>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (family, ratio, q) = cells[c];
            estimate_once(
                family,
                config.p,
                q,
                config.n,
                ratio,
                run_seed(config.master_seed, c * reps + r),
            )
        })
        .collect();
    let mut hats = hats.into_iter();
    let mut out = Vec::with_capacity(cells.len());
    for &(family, ratio, q_true) in &cells {
        let q_hats = hats.by_ref().take(reps).collect::<Result<Vec<usize>>>()?;
        let bias: Vec<f64> = q_hats.iter().map(|&h| h as f64 - q_true as f64).collect();
        let (mean_bias, std_bias, _) = summary_stats(&bias);
        out.push(CellResult {
            family,
            ratio,
            q_true,
            q_hats,
            mean_bias,
            std_bias,
        });
    }
    Ok(GridReport {
        config: config.clone(),
        cells: out,
    })
}
