use std::path::PathBuf;

use adis_bench::latdim_validation::{simulate, SourceFamily};
use adis_bench::mixing::{gen_mixing, MixingFamily, MixingSpec};
use adis_bench::sources::SourceSuite;
use adis_core::data::write_matrix_csv;
use anyhow::Context;

use crate::Outcome;

fn parse_suite(s: &str) -> Result<SourceSuite, String> {
    SourceSuite::from_name(s).ok_or_else(|| {
        format!("unknown source suite '{s}' (synth5, sparse-bells, narrowband, speech)")
    })
}

fn parse_mixing(s: &str) -> Result<MixingFamily, String> {
    MixingFamily::from_name(s).ok_or_else(|| format!("unknown mixing family '{s}'"))
}

fn parse_source_family(s: &str) -> Result<SourceFamily, String> {
    SourceFamily::from_name(s)
        .ok_or_else(|| format!("unknown source family '{s}' (gaussian, uniform, gamma)"))
}

#[derive(clap::Subcommand)]
pub enum GenCommand {
    /// Noisy tall mixture `A s + sigma eta` with `sigma_min(A) = 1`.
    Mixture {
        #[arg(long, value_parser = parse_source_family, default_value = "gamma")]
        family: SourceFamily,
        #[arg(long, default_value_t = 10)]
        p: usize,
        #[arg(long, default_value_t = 2)]
        q: usize,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// `sigma_min(A) / sigma`.
        #[arg(long, default_value_t = 2.0)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// A bundled source suite.
    Sources {
        #[arg(long, value_parser = parse_suite, default_value = "synth5")]
        suite: SourceSuite,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// A square mixing matrix.
    Mixing {
        #[arg(long, value_parser = parse_mixing, default_value = "uniform-random")]
        family: MixingFamily,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Square noiseless mixture of a bundled suite, with its sources.
    Square {
        #[arg(long, value_parser = parse_suite, default_value = "synth5")]
        suite: SourceSuite,
        #[arg(long, value_parser = parse_mixing, default_value = "uniform-random")]
        family: MixingFamily,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the true sources.
        #[arg(long)]
        sources_out: Option<PathBuf>,
    },
}

pub fn run(cmd: GenCommand) -> anyhow::Result<Outcome> {
    match cmd {
        GenCommand::Mixture {
            family,
            p,
            q,
            n,
            ratio,
            seed,
            out,
        } => {
            if q == 0 || q > p || n < 2 || (ratio.is_nan() || ratio <= 0.0) {
                anyhow::bail!("need 1 <= q <= p, n >= 2 and a positive ratio");
            }
            write_matrix_csv(&out, &simulate(family, p, q, n, ratio, seed), None)?;
        }
        GenCommand::Sources {
            suite,
            n,
            seed,
            out,
        } => {
            write_matrix_csv(&out, &suite.generate(n, seed)?, None)?;
        }
        GenCommand::Mixing {
            family,
            dim,
            seed,
            out,
        } => {
            write_matrix_csv(
                &out,
                &gen_mixing(&MixingSpec::new(family, dim, seed))?,
                None,
            )?;
        }
        GenCommand::Square {
            suite,
            family,
            n,
            seed,
            out,
            sources_out,
        } => {
            let s = suite.generate(n, seed)?;
            let a = gen_mixing(&MixingSpec::new(family, s.nrows(), seed))?;
            write_matrix_csv(&out, &(a * &s), None)?;
            if let Some(path) = sources_out {
                write_matrix_csv(&path, &s, None)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(Outcome::Success)
}
