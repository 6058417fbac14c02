use std::path::PathBuf;
use std::time::Instant;

use adis_core::latdim::estimate_q_replicates;
use adis_core::whiten::{center, center_samples};
use adis_core::DataMatrix;
use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::config::{load, overlay};
use crate::output::{Manifest, OutDir};
use crate::Outcome;

#[derive(clap::Args)]
pub struct Args {
    /// Observation matrix, channels in rows (CSV or binary).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Permuted replicates averaged into the lower bound.
    #[arg(long)]
    replicates: Option<usize>,
    /// Skip channel centering.
    #[arg(long)]
    square: bool,
    /// Directory for the summary, profile and manifest; stdout only when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run configuration, or the manifest of an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatdimRun {
    pub input: Option<PathBuf>,
    pub seed: u64,
    pub replicates: usize,
    pub channel_center: bool,
    pub out: Option<PathBuf>,
}

impl Default for LatdimRun {
    fn default() -> Self {
        Self {
            input: None,
            seed: 0,
            replicates: 1,
            channel_center: true,
            out: None,
        }
    }
}

pub fn run(args: Args) -> anyhow::Result<Outcome> {
    let mut run: LatdimRun = load(args.config.as_deref(), "latdim")?;
    if args.input.is_some() {
        run.input = args.input;
    }
    if args.out.is_some() {
        run.out = args.out;
    }
    overlay(&mut run.seed, args.seed);
    overlay(&mut run.replicates, args.replicates);
    if args.square {
        run.channel_center = false;
    }
    if run.replicates == 0 {
        anyhow::bail!("replicates must be at least 1");
    }
    let input = run
        .input
        .as_deref()
        .context("no input given (--input or config `input`)")?;
    let data = DataMatrix::read(input).with_context(|| format!("reading {}", input.display()))?;
    let started = Instant::now();
    let (x, _) = if run.channel_center {
        center(&data)
    } else {
        center_samples(&data)
    };
    let summary =
        estimate_q_replicates(&x, run.seed, run.replicates).context("latdim stage failed")?;
    let elapsed = started.elapsed().as_secs_f64();
    if let Some(root) = &run.out {
        let mut dir = OutDir::create(root)?;
        dir.json("latdim.json", &summary)?;
        dir.text("profile.csv", &summary.profile_csv())?;
        let mut manifest = Manifest::new("latdim", &run);
        manifest.seeds.insert("seed", run.seed);
        manifest.timings.insert("total".into(), elapsed);
        dir.manifest(manifest)?;
    }
    if summary.degenerate {
        log::warn!(
            "flat or empty cross-validation profile; q_hat falls back to the permutation bound"
        );
    }
    println!("{}", summary.q_hat);
    Ok(Outcome::Success)
}
