//! End-to-end pipeline from raw observations to sources.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contrast::ProblemFactory;
use crate::data::DataMatrix;
use crate::error::Result;
use crate::latdim::{estimate_q_replicates, LatDimSummary};
use crate::pursuit::{pursue, PursuitConfig, PursuitResult};
use crate::whiten::{
    center, center_samples, fit_centered, source_stats, PpcaModel, SourceStats, WhitenConfig,
};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeConfig {
    pub whiten: WhitenConfig,
    pub pursuit: PursuitConfig,
    /// Permuted replicates averaged by the dimensionality estimate.
    pub latdim_replicates: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub latdim_s: f64,
    pub whiten_s: f64,
    pub pursuit_s: f64,
    pub stats_s: f64,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub pursuit: PursuitResult,
    pub model: PpcaModel,
    /// Absent for square mixing (`p = q`), where residual variance is undefined.
    pub stats: Option<SourceStats>,
    pub latdim: Option<LatDimSummary>,
    /// Centered data the model was fitted to.
    pub centered: DMatrix<f64>,
    pub timings: StageTimings,
}

impl Decomposition {
    /// Final mixing estimate `A_hat` for the recovered rotation.
    pub fn mixing(&self) -> DMatrix<f64> {
        self.model.mixing(&self.pursuit.q_mat)
    }
}

/// Independent stream for the pursuit stage so that running the
/// dimensionality estimate does not shift the pursuit draws.
pub fn pursuit_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Runs the pipeline with the default negentropy contrast.
pub fn decompose(
    data: &DataMatrix,
    q: Option<usize>,
    config: &DecomposeConfig,
) -> Result<Decomposition> {
    decompose_with(data, q, config, &ProblemFactory::negentropy())
}

pub fn decompose_with(
    data: &DataMatrix,
    q: Option<usize>,
    config: &DecomposeConfig,
    factory: &ProblemFactory,
) -> Result<Decomposition> {
    config.pursuit.validate().map_err(|e| e.at("config"))?;
    let mut timings = StageTimings::default();
    let (x, mu_hat) = if config.whiten.channel_center {
        center(data)
    } else {
        center_samples(data)
    };

    let t = Instant::now();
    let (q, latdim) = match q {
        Some(q) => (q, None),
        None => {
            let reps = config.latdim_replicates.unwrap_or(1);
            let summary = estimate_q_replicates(&x, config.pursuit.rng_seed, reps)
                .map_err(|e| e.at("latdim"))?;
            log::info!(
                "estimated latent dimension q = {} (lower bound {})",
                summary.q_hat,
                summary.q_l
            );
            (summary.q_hat, Some(summary))
        }
    };
    timings.latdim_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let model = fit_centered(&x, mu_hat, q, &config.whiten).map_err(|e| e.at("whiten"))?;
    timings.whiten_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut rng = pursuit_rng(config.pursuit.rng_seed);
    let pursuit = pursue(model.x_tilde.clone(), factory, &config.pursuit, &mut rng)?;
    timings.pursuit_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let stats = if model.q < data.channels() {
        Some(
            source_stats(&model.mixing(&pursuit.q_mat), &x, &pursuit.s_hat)
                .map_err(|e| e.at("stats"))?,
        )
    } else {
        None
    };
    timings.stats_s = t.elapsed().as_secs_f64();

    Ok(Decomposition {
        pursuit,
        model,
        stats,
        latdim,
        centered: x,
        timings,
    })
}
