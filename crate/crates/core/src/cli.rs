//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Anchors};
use crate::config::RunConfig;
use crate::error::Result;
use crate::refinement::{Check, SimParams};
use crate::selection::{scorer_from_spec, AnchorConfig};
use crate::util::{read_file, to_jsonl, write_atomic};

#[derive(Debug, Parser)]
#[command(name = "clover-lab", version, about = "Score, generate, select and analyse planner trajectory candidates")]
pub struct Cli {
    /// JSON run configuration (defaults to $CLOVER_LAB_CONFIG, then built-ins).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate, pre-check, score and filter pseudo-expert candidates.
    GenPseudoExperts {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score candidate-pool trajectories against their scenes.
    Score {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Score cache; created when missing, rebuilt when stale.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Rank pools with a scorer, optionally with anchor reranking.
    Rank {
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long)]
        anchor: Option<PathBuf>,
        #[arg(long)]
        lambda_s: Option<f64>,
        #[arg(long)]
        lambda_xy: Option<f64>,
        #[arg(long)]
        lambda_psi: Option<f64>,
        /// Per-candidate CSV.
        #[arg(long)]
        out: PathBuf,
        /// Selection report JSON (default: `out` with a .json extension).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build top-k and vector-Pareto target sets.
    DistillTargets {
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        pareto_max: Option<usize>,
        #[arg(long)]
        pareto_min: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run randomized bound checks.
    Simulate {
        #[arg(long)]
        check: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON simulation parameters (default: the config's).
        #[arg(long)]
        params: Option<PathBuf>,
        /// JSON report; the trial log goes next to it as CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pool quality and diversity statistics.
    Analyze {
        /// Directory of pool JSONL files.
        #[arg(long)]
        pools: PathBuf,
        #[arg(long, default_value = "oracle")]
        scorer: String,
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid over anchor reranking weights.
    SweepAnchor {
        #[command(flatten)]
        pool: PoolArgs,
        /// Anchor trajectories; defaults to the scenes' human trajectories.
        #[arg(long)]
        anchor: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run everything on the bundled scenes.
    Demo {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "demo-out")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    /// Candidate-pool JSONL.
    #[arg(long)]
    pub pool: PathBuf,
    /// oracle | noisy:<eps>:<seed>[:<p_flip>] | tabular:<file>
    #[arg(long, default_value = "oracle")]
    pub scorer: String,
    /// Scene directory, for truth when the pool has none.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
}

/// What a successful run produced, for the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Violations(usize),
}

fn scenes_opt(dir: Option<&Path>) -> Result<Vec<crate::scene::Scene>> {
    dir.map_or(Ok(Vec::new()), commands::load_scenes)
}

fn load_pools(p: &PoolArgs) -> Result<Vec<crate::selection::CandidatePool>> {
    let records = commands::load_pool_records(&p.pool)?;
    commands::pools_with_scenes(&records, &scenes_opt(p.scenes.as_deref())?)
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let cfg = RunConfig::resolve(cli.config.as_deref())?;
    let jobs = cli.jobs.max(1);
    match cli.command {
        Command::GenPseudoExperts { scenes, seed, out } => {
            let scenes = commands::load_scenes(&scenes)?;
            let outputs = commands::gen_pseudo_experts(&scenes, &cfg, seed.unwrap_or(cfg.seed), jobs)?;
            commands::write_gen_outputs(&out, &outputs, &cfg)?;
        }
        Command::Score { scenes, pool, out, cache } => {
            let scenes = commands::load_scenes(&scenes)?;
            let records = commands::load_pool_records(&pool)?;
            let cache = cache.or(cfg.cache.clone());
            let scored = commands::score_records(&scenes, &records, &cfg, cache.as_deref(), jobs)?;
            write_atomic(&out, to_jsonl(&scored)?.as_bytes())?;
        }
        Command::Rank {
            pool,
            anchor,
            lambda_s,
            lambda_xy,
            lambda_psi,
            out,
            report,
        } => {
            let scorer = scorer_from_spec(&pool.scorer)?;
            let pools = load_pools(&pool)?;
            let acfg = AnchorConfig {
                lambda_s: lambda_s.unwrap_or(cfg.anchor.lambda_s),
                lambda_xy: lambda_xy.unwrap_or(cfg.anchor.lambda_xy),
                lambda_psi: lambda_psi.unwrap_or(cfg.anchor.lambda_psi),
                ..cfg.anchor
            };
            let anchors = anchor.as_deref().map(Anchors::load).transpose()?;
            let ranked = commands::rank_pools(&pools, scorer.as_ref(), &cfg, anchors.as_ref().map(|a| (a, &acfg)), jobs)?;
            let report = report.unwrap_or_else(|| out.with_extension("json"));
            commands::write_rank_outputs(&out, &report, &ranked)?;
        }
        Command::DistillTargets {
            pool,
            k,
            pareto_max,
            pareto_min,
            out,
        } => {
            let scorer = scorer_from_spec(&pool.scorer)?;
            let pools = load_pools(&pool)?;
            let targets = commands::distill_targets(
                &pools,
                scorer.as_ref(),
                &cfg.score_weights,
                k.unwrap_or(cfg.topk),
                pareto_max.unwrap_or(cfg.pareto_max),
                pareto_min.unwrap_or(cfg.pareto_min),
                jobs,
            )?;
            commands::write_targets(&out, &targets)?;
        }
        Command::Simulate {
            check,
            trials,
            seed,
            params,
            out,
        } => {
            let check: Check = check.parse()?;
            let params: SimParams = match params {
                Some(p) => serde_json::from_str(&read_file(&p)?)?,
                None => cfg.simulation.clone(),
            };
            let r = commands::simulate(check, trials, seed.unwrap_or(cfg.seed), &params, jobs, &out)?;
            if r.violations > 0 {
                return Ok(Outcome::Violations(r.violations));
            }
        }
        Command::Analyze { pools, scorer, scenes, out } => {
            let scorer = scorer_from_spec(&scorer)?;
            let records = commands::load_pool_dir(&pools)?;
            let pools = commands::pools_with_scenes(&records, &scenes_opt(scenes.as_deref())?)?;
            let rows = commands::analyze_pools(&pools, scorer.as_ref(), &cfg, jobs)?;
            commands::write_analysis(&out, &rows)?;
        }
        Command::SweepAnchor { pool, anchor, out } => {
            let scorer = scorer_from_spec(&pool.scorer)?;
            let scenes = scenes_opt(pool.scenes.as_deref())?;
            let anchors = match anchor {
                Some(a) => Anchors::load(&a)?,
                None if !scenes.is_empty() => Anchors::from_scenes(&scenes),
                None => {
                    return Err(crate::Error::invalid("sweep-anchor needs --anchor or --scenes"));
                }
            };
            let pools = commands::pools_with_scenes(&commands::load_pool_records(&pool.pool)?, &scenes)?;
            let rows = commands::sweep_anchor(&pools, scorer.as_ref(), &cfg, &anchors, &commands::default_sweep_grid(), jobs)?;
            commands::write_sweep(&out, &rows)?;
        }
        Command::Demo { seed, out } => {
            commands::run_demo(&out, &cfg, seed.unwrap_or(cfg.seed), jobs)?;
        }
    }
    Ok(Outcome::Ok)
}

/// Parses `args` and runs; 0 on success, 1 on bound violations, 2 on
/// errors.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violations(n)) => {
            eprintln!("bound violations: {n}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
