use std::path::{Path, PathBuf};
use std::time::Instant;

use adis_core::data::write_matrix_csv;
use adis_core::pursuit::JointOutcome;
use adis_core::{decompose, CoreError, DataMatrix, DecomposeConfig, Decomposition};
use adis_nlp::{NlpStatus, QnKind};
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
    /// Latent dimension; estimated from the data when absent.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run configuration, or the manifest of an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seeds drawn per component.
    #[arg(long = "ns")]
    n_s: Option<usize>,
    /// Best seeds solved per component.
    #[arg(long)]
    retained: Option<usize>,
    /// Skip the joint orthonormal refinement.
    #[arg(long)]
    no_stage2: bool,
    /// Quasi-Newton model: sr1, bfgs, l-sr1 or l-bfgs.
    #[arg(long)]
    qn: Option<QnKind>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Square noiseless setting: no channel centering.
    #[arg(long)]
    square: bool,
    /// Fail instead of clipping when a retained eigenvalue sits on the noise floor.
    #[arg(long)]
    strict: bool,
    /// Permuted replicates averaged by the dimensionality estimate.
    #[arg(long)]
    latdim_replicates: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeRun {
    pub input: Option<PathBuf>,
    pub q: Option<usize>,
    pub out: PathBuf,
    pub decompose: DecomposeConfig,
}

impl Default for DecomposeRun {
    fn default() -> Self {
        Self {
            input: None,
            q: None,
            out: PathBuf::from("adis-out"),
            decompose: DecomposeConfig::default(),
        }
    }
}

fn effective(args: Args) -> anyhow::Result<DecomposeRun> {
    let mut run: DecomposeRun = load(args.config.as_deref(), "decompose")?;
    if args.input.is_some() {
        run.input = args.input;
    }
    if args.q.is_some() {
        run.q = args.q;
    }
    overlay(&mut run.out, args.out);
    let d = &mut run.decompose;
    overlay(&mut d.pursuit.rng_seed, args.seed);
    overlay(&mut d.pursuit.n_s, args.n_s);
    overlay(&mut d.pursuit.retained, args.retained);
    overlay(&mut d.pursuit.solver.qn_kind, args.qn);
    overlay(&mut d.pursuit.solver.max_outer, args.max_outer);
    if args.no_stage2 {
        d.pursuit.run_stage2 = false;
    }
    if args.square {
        d.whiten.channel_center = false;
    }
    if args.strict {
        d.whiten.strict = true;
    }
    if args.latdim_replicates.is_some() {
        d.latdim_replicates = args.latdim_replicates;
    }
    d.pursuit
        .validate()
        .context("invalid pursuit configuration")?;
    Ok(run)
}

pub fn run(args: Args) -> anyhow::Result<Outcome> {
    let run = effective(args)?;
    let input = run
        .input
        .as_deref()
        .context("no input given (--input or config `input`)")?;
    let data = DataMatrix::read(input).with_context(|| format!("reading {}", input.display()))?;
    if run.q == Some(0) {
        anyhow::bail!("q must be at least 1");
    }
    let q_source = if run.q.is_some() { "user" } else { "latdim" };
    let started = Instant::now();
    let result = decompose(&data, run.q, &run.decompose);
    let mut manifest = Manifest::new("decompose", &run);
    manifest
        .seeds
        .insert("rng_seed", run.decompose.pursuit.rng_seed);
    manifest.q_source = Some(q_source);
    match result {
        Ok(out) => {
            let mut dir = OutDir::create(&run.out)?;
            let outcome = write_outputs(&mut dir, &data, &out, q_source)?;
            manifest.status = match outcome {
                Outcome::Success => "ok",
                Outcome::NotConverged => "not-converged",
            };
            let t = &out.timings;
            for (stage, secs) in [
                ("latdim", t.latdim_s),
                ("whiten", t.whiten_s),
                ("pursuit", t.pursuit_s),
                ("stats", t.stats_s),
                ("total", started.elapsed().as_secs_f64()),
            ] {
                manifest.timings.insert(stage.into(), secs);
            }
            dir.manifest(manifest)?;
            if outcome == Outcome::NotConverged {
                eprintln!(
                    "joint stage did not converge: {:?}",
                    out.pursuit.joint_outcome
                );
            }
            println!(
                "q = {} ({q_source}), joint stage {}, outputs in {}",
                out.model.q,
                out.pursuit.joint_outcome.label(),
                run.out.display()
            );
            Ok(outcome)
        }
        Err(err) => {
            if let CoreError::ComponentFailed { component, traces } = err.root() {
                write_partial(&run.out, *component, traces, manifest)?;
            }
            Err(err).context("decomposition failed")
        }
    }
}

fn write_partial(
    root: &Path,
    component: usize,
    traces: &[adis_nlp::SolveTrace],
    mut manifest: Manifest<'_, DecomposeRun>,
) -> anyhow::Result<()> {
    let mut dir = OutDir::create(root)?;
    for (r, trace) in traces.iter().enumerate() {
        dir.trace(&format!("trace-{component}-seed{}.jsonl", r + 1), trace)?;
    }
    manifest.status = "not-converged";
    dir.manifest(manifest)
}

#[derive(Serialize)]
struct ModelReport<'a> {
    q: usize,
    q_source: &'a str,
    model: adis_core::whiten::ModelSummary,
    joint_outcome: &'a JointOutcome,
    stage1_objectives: &'a [f64],
    stage2_objectives: &'a [f64],
    latdim: Option<&'a adis_core::LatDimSummary>,
}

fn write_outputs(
    dir: &mut OutDir,
    data: &DataMatrix,
    out: &Decomposition,
    q_source: &str,
) -> anyhow::Result<Outcome> {
    let pursuit = &out.pursuit;
    let q = out.model.q;
    write_matrix_csv(dir.file("Q.csv"), &pursuit.q_mat, None)?;
    write_matrix_csv(
        dir.file("sources.csv"),
        &pursuit.s_hat,
        data.col_labels.as_deref(),
    )?;
    write_matrix_csv(dir.file("mixing.csv"), &out.mixing(), None)?;
    dir.json(
        "model.json",
        &ModelReport {
            q,
            q_source,
            model: out.model.summary(),
            joint_outcome: &pursuit.joint_outcome,
            stage1_objectives: &pursuit.stage1_objectives,
            stage2_objectives: &pursuit.stage2_objectives,
            latdim: out.latdim.as_ref(),
        },
    )?;
    dir.text("stats.csv", &stats_csv(out, q))?;
    for (k, trace) in pursuit.component_traces.iter().enumerate() {
        dir.trace(&format!("trace-{}.jsonl", k + 1), trace)?;
    }
    if let Some(trace) = &pursuit.joint_trace {
        dir.trace("trace-joint.jsonl", trace)?;
    }
    let converged = match &pursuit.joint_outcome {
        JointOutcome::Skipped | JointOutcome::Accepted { .. } => true,
        JointOutcome::FellBack { status, .. } => *status == Some(NlpStatus::Converged),
    };
    Ok(if converged {
        Outcome::Success
    } else {
        Outcome::NotConverged
    })
}

/// One row per sample: residual variance and the relative variance of each
/// component. Only the header is written for square models.
fn stats_csv(out: &Decomposition, q: usize) -> String {
    let mut text = String::from("sample,sigma2");
    for k in 1..=q {
        text.push_str(&format!(",rv_{k}"));
    }
    text.push('\n');
    if let Some(stats) = &out.stats {
        for i in 0..stats.sigma2_i.len() {
            text.push_str(&format!("{i},{:?}", stats.sigma2_i[i]));
            for k in 0..q {
                text.push_str(&format!(",{:?}", stats.rv[(k, i)]));
            }
            text.push('\n');
        }
    }
    text
}
