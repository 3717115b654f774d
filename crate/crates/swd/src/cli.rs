//! `swd estimate | test | simulate`.
//!
//! Every flag can also be set through an environment variable named
//! `SWD_<FLAG>` (for example `SWD_K=500`); command-line values win.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use swd_core::estimators::PotentialSides;
use swd_core::{confidence_interval, sample_directions, InferenceReport};

use crate::error::{Error, Result};
use crate::report::{render, write_output, EstimateReport, Format, TestReport};
use crate::{io, parallel, sim, streams};

#[derive(Debug, Parser)]
#[command(name = "swd", version, about = "Sliced Wasserstein estimation and two-sample inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate SW_p^p between two samples, with variance components and a
    /// confidence interval.
    Estimate(SampleArgs),
    /// Test H0: SW_p^p(P, Q) = delta.
    Test {
        #[command(flatten)]
        sample: SampleArgs,
        /// Null value of SW_p^p.
        #[arg(long, env = "SWD_DELTA", allow_negative_numbers = true)]
        delta: f64,
    },
    /// Run a replication plan and write replications.csv and summary.json.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Seed for every random substream.
    #[arg(long, env = "SWD_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (0: one per core).
    #[arg(long, env = "SWD_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[arg(long, env = "SWD_FORMAT", value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file (estimate, test) or directory (simulate). Defaults to
    /// stdout / the current directory.
    #[arg(long, env = "SWD_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Source sample: headerless CSV, one observation per row.
    #[arg(long, env = "SWD_X")]
    pub x: PathBuf,
    /// Target sample, same number of columns as --x.
    #[arg(long, env = "SWD_Y")]
    pub y: PathBuf,
    /// Cost exponent, > 1.
    #[arg(long, env = "SWD_P", default_value_t = 2.0)]
    pub p: f64,
    /// Number of random directions.
    #[arg(long, env = "SWD_K", default_value_t = 1000)]
    pub k: usize,
    /// Confidence level of the interval (the test rejects at 1 - level).
    #[arg(long, env = "SWD_LEVEL", default_value_t = 0.95)]
    pub level: f64,
    /// For p != 2: studentize with the slicing variance alone. Only accepted
    /// when k is small against nm/(n+m).
    #[arg(long, env = "SWD_SLICING_ONLY")]
    pub slicing_only: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation plan (JSON).
    #[arg(long, env = "SWD_PLAN")]
    pub plan: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
}

struct Loaded {
    x: swd_core::SampleMatrix,
    y: swd_core::SampleMatrix,
    analysis: swd_core::Analysis,
    seed: u64,
}

fn load_and_analyze(args: &SampleArgs) -> Result<Loaded> {
    swd_core::Exponent::new(args.p)?;
    if args.k == 0 {
        return Err(swd_core::Error::InvalidArgument("--k must be at least 1".into()).into());
    }
    let x = io::read_samples(&args.x)?;
    let y = io::read_samples(&args.y)?;
    if x.d() != y.d() {
        return Err(Error::Input {
            path: args.y.clone(),
            message: format!("dimension mismatch: --x has {} columns, --y has {}", x.d(), y.d()),
        });
    }
    let seed = args.common.seed.unwrap_or(0);
    let dirs = sample_directions(x.d(), args.k, seed, streams::DIRECTIONS)?;
    let sides = if args.p == 2.0 { PotentialSides::Both } else { PotentialSides::None };
    let analysis = pool(args.common.threads)?.install(|| parallel::analyze(&x, &y, &dirs, args.p, sides))?;
    Ok(Loaded { x, y, analysis, seed })
}

fn variance(args: &SampleArgs, analysis: &swd_core::Analysis) -> Result<swd_core::VarianceComponents> {
    if args.p == 2.0 && !args.slicing_only {
        Ok(analysis.variance()?)
    } else if args.slicing_only {
        Ok(analysis.slicing_only_variance()?)
    } else {
        Err(swd_core::Error::Unsupported(format!(
            "inference for p = {} needs --slicing-only (variance from directions alone)",
            args.p
        ))
        .into())
    }
}

pub fn cmd_estimate(args: &SampleArgs) -> Result<EstimateReport> {
    let loaded = load_and_analyze(args)?;
    let a = &loaded.analysis;
    let vc = if args.slicing_only || (args.p == 2.0 && a.w_hat.is_some()) { Some(variance(args, a)?) } else { None };
    let ci = match &vc {
        Some(v) => Some(confidence_interval(
            a.estimate.sw_pp,
            a.estimate.n,
            a.estimate.m,
            a.estimate.k,
            v.combined,
            args.level,
        )?),
        None => None,
    };
    let report = EstimateReport::new(loaded.seed, loaded.x.d(), a, vc.as_ref(), args.level, ci);
    write_output(args.common.out.as_deref(), &render(&report, args.common.format)?)?;
    Ok(report)
}

pub fn cmd_test(args: &SampleArgs, delta: f64) -> Result<TestReport> {
    let loaded = load_and_analyze(args)?;
    let a = &loaded.analysis;
    let vc = variance(args, a)?;
    let e = &a.estimate;
    let inf = InferenceReport::new(e.sw_pp, e.n, e.m, e.k, vc, delta, args.level)?;
    let report = TestReport::new(loaded.seed, args.p, loaded.y.d(), e.n, e.m, e.k, &inf);
    write_output(args.common.out.as_deref(), &render(&report, args.common.format)?)?;
    Ok(report)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<sim::SimulationResult> {
    let mut plan = sim::SimulationPlan::load(&args.plan)?;
    if let Some(seed) = args.common.seed {
        plan.master_seed = seed;
    }
    let result = pool(args.common.threads)?.install(|| sim::run_plan(&plan))?;
    let dir = args.common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    sim::write_result(&dir, &result)?;
    print!("{}", sim::rate_table(&result.summary));
    Ok(result)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(args) => cmd_estimate(&args).map(drop),
        Command::Test { sample, delta } => cmd_test(&sample, delta).map(drop),
        Command::Simulate(args) => cmd_simulate(&args).map(drop),
    }
}
