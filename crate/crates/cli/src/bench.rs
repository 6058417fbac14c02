use std::path::{Path, PathBuf};
use std::time::Instant;

use adis_bench::external::ExternalSeparator;
use adis_bench::latdim_validation::{latdim_validation, GridConfig, SourceFamily};
use adis_bench::mixing::MixingFamily;
use adis_bench::montecarlo::{monte_carlo_bss, AdisSeparator, McReport, Separator};
use adis_bench::problems::{
    electron_problem, nnls_problem, polygon_area, polygon_max_sq_distance, polygon_problem,
    polygon_start, Fixture, NnlsInstance,
};
use adis_bench::sources::SourceSuite;
use adis_core::data::read_matrix_csv;
use adis_core::DecomposeConfig;
use adis_nlp::{solve, AugLagConfig, NlpSolution, QnKind};
use anyhow::Context;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{load, overlay};
use crate::output::{Manifest, OutDir};
use crate::Outcome;

#[derive(clap::Subcommand)]
pub enum BenchCommand {
    /// Square noiseless Monte-Carlo separation scored by SIR.
    SirMc(SirMcArgs),
    /// Bias of the dimensionality estimate over a simulation grid.
    LatdimGrid(GridArgs),
    /// Solver benchmark problems.
    #[command(subcommand)]
    Nlp(NlpCommand),
}

pub fn run(cmd: BenchCommand) -> anyhow::Result<Outcome> {
    match cmd {
        BenchCommand::SirMc(args) => sir_mc(args),
        BenchCommand::LatdimGrid(args) => latdim_grid(args),
        BenchCommand::Nlp(cmd) => nlp(cmd),
    }
}

fn parse_mixing(s: &str) -> Result<MixingFamily, String> {
    MixingFamily::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = MixingFamily::ALL.iter().map(|f| f.name()).collect();
        format!(
            "unknown mixing family '{s}' (expected one of {})",
            names.join(", ")
        )
    })
}

fn parse_source_family(s: &str) -> Result<SourceFamily, String> {
    SourceFamily::from_name(s)
        .ok_or_else(|| format!("unknown source family '{s}' (gaussian, uniform, gamma)"))
}

#[derive(clap::Args)]
pub struct SirMcArgs {
    /// Bundled source suite: synth5, sparse-bells, narrowband or speech.
    #[arg(long)]
    sources: Option<String>,
    /// Source matrix file (CSV), used instead of a bundled suite.
    #[arg(long)]
    sources_file: Option<PathBuf>,
    #[arg(long, value_parser = parse_mixing)]
    family: Option<MixingFamily>,
    /// Monte-Carlo runs.
    #[arg(long)]
    nb: Option<usize>,
    /// Samples per bundled source.
    #[arg(long)]
    n: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Score this executable instead of the built-in pipeline.
    #[arg(long)]
    external: Option<PathBuf>,
    /// Leading argument for the external program; repeatable.
    #[arg(long = "external-arg", allow_hyphen_values = true)]
    external_args: Vec<String>,
    /// Width of the SIR histogram bins in dB.
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SirMcRun {
    pub sources: String,
    pub sources_file: Option<PathBuf>,
    pub family: MixingFamily,
    pub nb: usize,
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub external: Option<PathBuf>,
    pub external_args: Vec<String>,
    pub bin_width: f64,
    pub decompose: DecomposeConfig,
}

impl Default for SirMcRun {
    fn default() -> Self {
        Self {
            sources: "synth5".into(),
            sources_file: None,
            family: MixingFamily::UniformRandom,
            nb: 100,
            n: 2000,
            seed: 0,
            out: PathBuf::from("adis-sir-mc"),
            external: None,
            external_args: Vec::new(),
            bin_width: 1.0,
            decompose: DecomposeConfig::default(),
        }
    }
}

fn histogram_csv(report: &McReport, width: f64) -> String {
    let values: Vec<f64> = report.successful().filter_map(|r| r.mean_sir_db).collect();
    let mut text = String::from("lo_db,hi_db,count\n");
    if values.is_empty() {
        return text;
    }
    let lo = (values.iter().copied().fold(f64::INFINITY, f64::min) / width).floor() * width;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = (((hi - lo) / width).floor() as usize) + 1;
    for (k, count) in report.histogram(lo, width, bins).iter().enumerate() {
        let a = lo + k as f64 * width;
        text.push_str(&format!("{a:?},{:?},{count}\n", a + width));
    }
    text
}

fn sir_mc(args: SirMcArgs) -> anyhow::Result<Outcome> {
    let mut run: SirMcRun = load(args.config.as_deref(), "bench sir-mc")?;
    overlay(&mut run.sources, args.sources);
    if args.sources_file.is_some() {
        run.sources_file = args.sources_file;
    }
    overlay(&mut run.family, args.family);
    overlay(&mut run.nb, args.nb);
    overlay(&mut run.n, args.n);
    overlay(&mut run.seed, args.seed);
    overlay(&mut run.out, args.out);
    overlay(&mut run.bin_width, args.bin_width);
    if args.external.is_some() {
        run.external = args.external;
        run.external_args = args.external_args;
    }
    if run.nb == 0 || run.bin_width.is_nan() || run.bin_width <= 0.0 {
        anyhow::bail!("need nb >= 1 and a positive bin width");
    }
    let sources = match &run.sources_file {
        Some(path) => {
            read_matrix_csv(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => SourceSuite::from_name(&run.sources)
            .with_context(|| format!("unknown source suite '{}'", run.sources))?
            .generate(run.n, run.seed)?,
    };
    let separator: Box<dyn Separator> = match &run.external {
        Some(program) => Box::new(ExternalSeparator {
            program: program.clone(),
            args: run.external_args.clone(),
        }),
        None => Box::new(AdisSeparator::square(run.decompose.clone())),
    };
    let started = Instant::now();
    let report = monte_carlo_bss(&sources, run.family, run.nb, run.seed, separator.as_ref())?;
    let elapsed = started.elapsed().as_secs_f64();

    let mut dir = OutDir::create(&run.out)?;
    dir.text("runs.csv", &report.to_csv()?)?;
    dir.json("summary.json", &report)?;
    dir.text("histogram.csv", &histogram_csv(&report, run.bin_width))?;
    let mut manifest = Manifest::new("bench sir-mc", &run);
    manifest.seeds.insert("master_seed", run.seed);
    manifest.timings.insert("total".into(), elapsed);
    if report.failures > 0 {
        manifest.status = "not-converged";
    }
    dir.manifest(manifest)?;
    println!(
        "{} on {}: M = {:.2} dB, S = {:.2} dB, median {:.2} dB, {} of {} runs failed",
        report.separator,
        run.family.name(),
        report.mean_db,
        report.std_db,
        report.median_db,
        report.failures,
        report.n_b
    );
    Ok(if report.failures > 0 {
        Outcome::NotConverged
    } else {
        Outcome::Success
    })
}

#[derive(clap::Args)]
pub struct GridArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Repetitions per cell.
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_source_family)]
    families: Option<Vec<SourceFamily>>,
    /// Values of sigma_min(A) / sigma.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    q_over_p: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridRun {
    pub grid: GridConfig,
    pub out: PathBuf,
}

impl Default for GridRun {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            out: PathBuf::from("adis-latdim-grid"),
        }
    }
}

fn latdim_grid(args: GridArgs) -> anyhow::Result<Outcome> {
    let mut run: GridRun = load(args.config.as_deref(), "bench latdim-grid")?;
    let g = &mut run.grid;
    overlay(&mut g.p, args.p);
    overlay(&mut g.n, args.n);
    overlay(&mut g.reps, args.reps);
    overlay(&mut g.master_seed, args.seed);
    overlay(&mut g.families, args.families);
    overlay(&mut g.ratios, args.ratios);
    overlay(&mut g.q_over_p, args.q_over_p);
    overlay(&mut run.out, args.out);
    let started = Instant::now();
    let report = latdim_validation(&run.grid)?;
    let elapsed = started.elapsed().as_secs_f64();
    let mut dir = OutDir::create(&run.out)?;
    dir.text("grid.csv", &report.to_csv()?)?;
    dir.json("grid.json", &report)?;
    let mut manifest = Manifest::new("bench latdim-grid", &run);
    manifest.seeds.insert("master_seed", run.grid.master_seed);
    manifest.timings.insert("total".into(), elapsed);
    dir.manifest(manifest)?;
    let worst = report
        .cells
        .iter()
        .map(|c| c.mean_bias.abs())
        .fold(0.0, f64::max);
    println!("{} cells, worst |mean bias| {worst:.2}", report.cells.len());
    Ok(Outcome::Success)
}

#[derive(clap::Subcommand)]
pub enum NlpCommand {
    /// Unit charges on the sphere with minimal Coulomb energy.
    Electron {
        /// Number of charges [default: 50].
        #[arg(long = "np")]
        n_p: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: NlpArgs,
    },
    /// Nonnegative least squares.
    Nnls {
        /// CSV matrix `[A | b]`; a random standard-normal instance when absent.
        #[arg(long)]
        file: Option<PathBuf>,
        /// Rows of the random instance [default: 40].
        #[arg(long)]
        rows: Option<usize>,
        /// Columns of the random instance [default: 20].
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: NlpArgs,
    },
    /// Largest polygon of unit diameter, multi-start.
    Polygon {
        /// Number of vertices [default: 6].
        #[arg(long = "nv")]
        n_v: Option<usize>,
        /// Starting points [default: 5].
        #[arg(long)]
        starts: Option<u64>,
        #[command(flatten)]
        common: NlpArgs,
    },
}

#[derive(clap::Args)]
pub struct NlpArgs {
    #[arg(long)]
    qn: Option<QnKind>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Directory for the result, trace and manifest; stdout only when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run configuration, or the manifest of an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Zero sizes mean "the problem's default".
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlpRun {
    pub problem: String,
    /// Charges for `electron`, vertices for `polygon`.
    pub size: usize,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    pub starts: u64,
    pub file: Option<PathBuf>,
    pub solver: AugLagConfig,
}

#[derive(Serialize)]
struct NlpReport<'a> {
    problem: &'a str,
    objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
    best_start: u64,
    solution: adis_nlp::SolutionSummary,
    x_star: Vec<f64>,
}

fn read_nnls(path: &Path) -> anyhow::Result<NnlsInstance> {
    let m = read_matrix_csv(path).with_context(|| format!("reading {}", path.display()))?;
    let cols = m.ncols();
    if cols < 2 {
        anyhow::bail!(
            "{}: need columns [A | b], got {cols} column(s)",
            path.display()
        );
    }
    Ok(NnlsInstance {
        a: m.columns(0, cols - 1).into_owned(),
        b: m.column(cols - 1).into_owned(),
        c: DMatrix::identity(cols - 1, cols - 1),
        d: DVector::zeros(cols - 1),
    })
}

fn nlp_run(cmd: NlpCommand) -> anyhow::Result<(NlpRun, Option<PathBuf>)> {
    let (problem, common) = match &cmd {
        NlpCommand::Electron { common, .. } => ("electron", common),
        NlpCommand::Nnls { common, .. } => ("nnls", common),
        NlpCommand::Polygon { common, .. } => ("polygon", common),
    };
    let mut run: NlpRun = load(common.config.as_deref(), "bench nlp")?;
    if !run.problem.is_empty() && run.problem != problem {
        anyhow::bail!("configuration is for `{}`, not `{problem}`", run.problem);
    }
    run.problem = problem.into();
    overlay(&mut run.solver.qn_kind, common.qn);
    overlay(&mut run.solver.max_outer, common.max_outer);
    let out = common.out.clone();
    match cmd {
        NlpCommand::Electron { n_p, seed, .. } => {
            overlay(&mut run.size, n_p);
            overlay(&mut run.seed, seed);
        }
        NlpCommand::Nnls {
            file,
            rows,
            cols,
            seed,
            ..
        } => {
            if file.is_some() {
                run.file = file;
            }
            overlay(&mut run.rows, rows);
            overlay(&mut run.cols, cols);
            overlay(&mut run.seed, seed);
        }
        NlpCommand::Polygon { n_v, starts, .. } => {
            overlay(&mut run.size, n_v);
            overlay(&mut run.starts, starts);
        }
    }
    let fill = |v: &mut usize, d: usize| {
        if *v == 0 {
            *v = d;
        }
    };
    match problem {
        "electron" => fill(&mut run.size, 50),
        "polygon" => fill(&mut run.size, 6),
        _ => {
            fill(&mut run.rows, 40);
            fill(&mut run.cols, 20);
        }
    }
    if run.starts == 0 {
        run.starts = if problem == "polygon" { 5 } else { 1 };
    }
    run.solver
        .validate()
        .context("invalid solver configuration")?;
    Ok((run, out))
}

fn nlp(cmd: NlpCommand) -> anyhow::Result<Outcome> {
    let (run, out) = nlp_run(cmd)?;
    let started = Instant::now();
    let (fixture, starts): (Fixture, Vec<DVector<f64>>) = match run.problem.as_str() {
        "electron" => {
            let fx = electron_problem(run.size, run.seed)?;
            let x0 = fx.x0.clone();
            (fx, vec![x0])
        }
        "nnls" => {
            let inst = match &run.file {
                Some(path) => read_nnls(path)?,
                None => NnlsInstance::random(run.rows, run.cols, run.seed),
            };
            let fx = nnls_problem(&inst)?;
            let x0 = fx.x0.clone();
            (fx, vec![x0])
        }
        _ => {
            let fx = polygon_problem(run.size)?;
            let starts = (0..run.starts)
                .map(|s| polygon_start(run.size, s))
                .collect();
            (fx, starts)
        }
    };
    let mut best: Option<(u64, NlpSolution)> = None;
    for (k, x0) in starts.iter().enumerate() {
        let sol = solve(&fixture.problem, x0, &run.solver)?;
        if starts.len() > 1 {
            println!(
                "start {k}: objective {:.6} status {:?} outer {}",
                sol.objective, sol.status, sol.outer_iterations
            );
        }
        let better = match &best {
            None => true,
            Some((_, b)) => match (sol.is_converged(), b.is_converged()) {
                (true, false) => true,
                (false, true) => false,
                _ => sol.objective < b.objective,
            },
        };
        if better {
            best = Some((k as u64, sol));
        }
    }
    let (best_start, sol) = best.expect("at least one start");
    let elapsed = started.elapsed().as_secs_f64();
    let area = (run.problem == "polygon").then(|| polygon_area(&sol.x_star, run.size));
    println!(
        "{}: objective {:.6} status {:?} kkt_grad {:.2e} kkt_feas {:.2e} outer {} inner {} time {elapsed:.2} s",
        fixture.name, sol.objective, sol.status, sol.kkt_grad, sol.kkt_feas, sol.outer_iterations, sol.inner_iterations
    );
    if let Some(a) = area {
        println!(
            "area {a:.6}, largest squared diameter {:.8}",
            polygon_max_sq_distance(&sol.x_star, run.size)
        );
    }
    let outcome = if sol.is_converged() {
        Outcome::Success
    } else {
        Outcome::NotConverged
    };
    if let Some(root) = &out {
        let mut dir = OutDir::create(root)?;
        dir.json(
            "result.json",
            &NlpReport {
                problem: &fixture.name,
                objective: sol.objective,
                area,
                best_start,
                solution: sol.summary(),
                x_star: sol.x_star.iter().copied().collect(),
            },
        )?;
        dir.trace("trace.jsonl", &sol.trace)?;
        let mut manifest = Manifest::new("bench nlp", &run);
        manifest.seeds.insert("seed", run.seed);
        manifest.timings.insert("total".into(), elapsed);
        if outcome == Outcome::NotConverged {
            manifest.status = "not-converged";
        }
        dir.manifest(manifest)?;
    }
    Ok(outcome)
}
