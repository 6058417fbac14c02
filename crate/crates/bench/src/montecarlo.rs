//! Square noiseless Monte-Carlo separation runs scored by SIR.
//!
//! Run `i` of a study with master seed `m` uses the first `u64` of the
//! ChaCha8 stream `i + 1` seeded with `m`. The per-run seed drives both the
//! mixing matrix and the separator, so results do not depend on the number
//! of worker threads or on the order runs finish in.

use adis_core::decompose::decompose_with;
use adis_core::pursuit::JointOutcome;
use adis_core::{DataMatrix, DecomposeConfig, ProblemFactory, WhitenConfig};
use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::mixing::{gen_mixing, MixingFamily, MixingSpec};
use crate::sir::sir;

/// Seed of run `index` under `master`.
pub fn run_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64 + 1);
    rng.next_u64()
}

/// Output of one separation.
#[derive(Clone, Debug)]
pub struct Separation {
    pub s_hat: DMatrix<f64>,
    /// Sources from the deflation stage alone, when the separator has one.
    pub stage1: Option<DMatrix<f64>>,
    /// `(stage 1, final)` summed contrast values.
    pub objectives: Option<(f64, f64)>,
    pub joint_outcome: Option<JointOutcome>,
}

/// Anything that maps a square mixture to `q` sources.
pub trait Separator: Sync {
    fn name(&self) -> String;
    fn separate(&self, x: &DMatrix<f64>, q: usize, seed: u64) -> Result<Separation>;
}

/// The built-in pipeline with a known `q`.
#[derive(Clone, Debug)]
pub struct AdisSeparator {
    pub config: DecomposeConfig,
}

impl AdisSeparator {
    /// Square noiseless setting: no channel centering, so all `p` directions
    /// are available to the sources.
    pub fn square(mut config: DecomposeConfig) -> Self {
        config.whiten = WhitenConfig {
            channel_center: false,
            ..config.whiten
        };
        Self { config }
    }
}

impl Separator for AdisSeparator {
    fn name(&self) -> String {
        "adis".into()
    }

    fn separate(&self, x: &DMatrix<f64>, q: usize, seed: u64) -> Result<Separation> {
        let mut config = self.config.clone();
        config.pursuit.rng_seed = seed;
        let data = DataMatrix::new(x.clone())?;
        let out = decompose_with(&data, Some(q), &config, &ProblemFactory::negentropy())?;
        let stage1 = &out.pursuit.stage1_q * &out.model.x_tilde;
        let s1: f64 = out.pursuit.stage1_objectives.iter().sum();
        let s2: f64 = out.pursuit.stage2_objectives.iter().sum();
        Ok(Separation {
            s_hat: out.pursuit.s_hat,
            stage1: Some(stage1),
            objectives: Some((s1, s2)),
            joint_outcome: Some(out.pursuit.joint_outcome),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRun {
    pub run: usize,
    pub seed: u64,
    pub mean_sir_db: Option<f64>,
    pub stage1_mean_sir_db: Option<f64>,
    pub sir_db: Vec<f64>,
    pub stage1_objective: Option<f64>,
    pub joint_objective: Option<f64>,
    pub joint_outcome: Option<String>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub separator: String,
    pub family: MixingFamily,
    pub n_b: usize,
    pub master_seed: u64,
    /// Mean over successful runs of the per-run mean SIR.
    pub mean_db: f64,
    /// Sample standard deviation of the per-run mean SIR.
    pub std_db: f64,
    pub median_db: f64,
    pub failures: usize,
    pub runs: Vec<McRun>,
}

impl McReport {
    pub fn successful(&self) -> impl Iterator<Item = &McRun> {
        self.runs.iter().filter(|r| r.mean_sir_db.is_some())
    }

    /// CSV, one row per run.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "run",
            "seed",
            "mean_sir_db",
            "stage1_mean_sir_db",
            "stage1_objective",
            "joint_objective",
            "joint_outcome",
            "error",
        ])
        .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for r in &self.runs {
            w.write_record([
                r.run.to_string(),
                r.seed.to_string(),
                opt(r.mean_sir_db),
                opt(r.stage1_mean_sir_db),
                opt(r.stage1_objective),
                opt(r.joint_objective),
                r.joint_outcome.clone().unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| BenchError::Report(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| BenchError::Report(e.to_string()))
    }

    /// Counts of per-run mean SIR in `width`-dB bins starting at `lo`.
    pub fn histogram(&self, lo: f64, width: f64, bins: usize) -> Vec<usize> {
        let mut h = vec![0; bins];
        for v in self.successful().filter_map(|r| r.mean_sir_db) {
            let b = ((v - lo) / width).floor();
            if b >= 0.0 && (b as usize) < bins {
                h[b as usize] += 1;
            }
        }
        h
    }
}

fn csv_err(e: csv::Error) -> BenchError {
    BenchError::Report(e.to_string())
}

/// Sample mean, sample standard deviation and median; NaN when empty.
pub fn summary_stats(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    (mean, std, median)
}

fn one_run(
    sources: &DMatrix<f64>,
    family: MixingFamily,
    separator: &dyn Separator,
    run: usize,
    seed: u64,
) -> McRun {
    let q = sources.nrows();
    let attempt = || -> Result<McRun> {
        let a = gen_mixing(&MixingSpec::new(family, q, seed))?;
        let x = &a * sources;
        let sep = separator.separate(&x, q, seed)?;
        let report = sir(sources, &sep.s_hat)?;
        let stage1_mean = match &sep.stage1 {
            Some(s1) => Some(sir(sources, s1)?.mean_db),
            None => None,
        };
        Ok(McRun {
            run,
            seed,
            mean_sir_db: Some(report.mean_db),
            stage1_mean_sir_db: stage1_mean,
            sir_db: report.sir_db,
            stage1_objective: sep.objectives.map(|o| o.0),
            joint_objective: sep.objectives.map(|o| o.1),
            joint_outcome: sep.joint_outcome.map(|o| o.label().to_string()),
            error: None,
        })
    };
    attempt().unwrap_or_else(|e| {
        log::warn!("run {run} (seed {seed}) failed: {e}");
        McRun {
            run,
            seed,
            mean_sir_db: None,
            stage1_mean_sir_db: None,
            sir_db: Vec::new(),
            stage1_objective: None,
            joint_objective: None,
            joint_outcome: None,
            error: Some(e.to_string()),
        }
    })
}

/// `n_b` fresh mixings of `sources` from `family`, each separated and scored.
pub fn monte_carlo_bss(
    sources: &DMatrix<f64>,
    family: MixingFamily,
    n_b: usize,
    master_seed: u64,
    separator: &dyn Separator,
) -> Result<McReport> {
    MixingSpec::new(family, sources.nrows(), 0).validate()?;
    // Rejects rank-deficient sources up front rather than once per run.
    sir(sources, sources)?;
    let runs: Vec<McRun> = (0..n_b)
        .into_par_iter()
        .map(|i| one_run(sources, family, separator, i, run_seed(master_seed, i)))
        .collect();
    let values: Vec<f64> = runs.iter().filter_map(|r| r.mean_sir_db).collect();
    let (mean_db, std_db, median_db) = summary_stats(&values);
    Ok(McReport {
        separator: separator.name(),
        family,
        n_b,
        master_seed,
        mean_db,
        std_db,
        median_db,
        failures: n_b - values.len(),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..5).map(|i| run_seed(9, i)).collect();
        let b: Vec<u64> = (0..5).map(|i| run_seed(9, i)).collect();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 5);
    }

    #[test]
    fn stats_of_small_sample() {
        let (m, s, med) = summary_stats(&[1.0, 2.0, 3.0, 10.0]);
        assert_eq!(m, 4.0);
        assert!((s - (50.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(med, 2.5);
    }
}
