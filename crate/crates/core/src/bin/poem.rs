use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use poem_core::envs::EnvId;
use poem_core::harness::compare::{format_table, write_table};
use poem_core::harness::evaluate::find_final_checkpoints;
use poem_core::harness::train::train_with_progress;
use poem_core::harness::tune::tune_with_progress;
use poem_core::harness::{
    compare_dirs, evaluate_checkpoint, Algo, ConfigFile, EvalOptions, RunConfig, SampleUnit, TuneSpec,
};

/// PPO with KL-triggered evolutionary mutation.
#[derive(Parser)]
#[command(name = "poem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one or more seeds and write checkpoints plus metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint, or every final.bin under a directory.
    Evaluate(EvalArgs),
    /// Welch t-test of POEM runs against PPO runs, per environment.
    Compare(CompareArgs),
    /// Random search around a base configuration.
    Tune(TuneArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, env = "POEM_CONFIG")]
    config: Option<PathBuf>,
    /// mountain_car_continuous or sparse_lander.
    #[arg(long, env = "POEM_ENV")]
    env: Option<String>,
    #[arg(long, env = "POEM_ALGO")]
    algo: Option<String>,
    #[arg(long, env = "POEM_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "POEM_TIMESTEPS")]
    timesteps: Option<usize>,
    #[arg(long, env = "POEM_OUT")]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        if let Some(e) = &self.env {
            file.env = Some(e.clone());
        }
        if let Some(a) = &self.algo {
            file.algo = Some(a.parse::<Algo>()?);
        }
        if let Some(s) = self.seed {
            file.seed = Some(s);
        }
        if let Some(t) = self.timesteps {
            file.total_timesteps = Some(t);
        }
        if let Some(o) = &self.out {
            file.output_dir = Some(o.clone());
        }
        Ok(RunConfig::resolve(&file)?)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Train this many consecutive seeds in parallel, one subdirectory each.
    #[arg(long, default_value_t = 1)]
    runs: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint file or a directory searched for final.bin.
    path: PathBuf,
    #[arg(long, env = "POEM_EPISODES", default_value_t = 15)]
    episodes: usize,
    #[arg(long, default_value_t = 1_000_000)]
    seed_base: u64,
    /// Override the env stored in the checkpoint.
    #[arg(long, env = "POEM_ENV")]
    env: Option<String>,
    /// Sample actions instead of taking the distribution mode.
    #[arg(long)]
    stochastic: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Directory holding the POEM runs' eval_episodes.csv files.
    poem_dir: PathBuf,
    /// Directory holding the PPO runs' eval_episodes.csv files.
    ppo_dir: PathBuf,
    #[arg(long, env = "POEM_ALPHA", default_value_t = 0.05)]
    alpha: f64,
    /// Sample unit for the t-test: runs or episodes.
    #[arg(long, default_value = "runs")]
    unit: String,
    /// Also write the table as CSV.
    #[arg(long, env = "POEM_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 100_000)]
    trial_timesteps: usize,
    /// Relative half-width of the search box.
    #[arg(long, default_value_t = 0.1)]
    bound: f64,
    #[arg(long, default_value_t = 4)]
    eval_episodes: usize,
}

fn output_root(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{}_{}", cfg.env, cfg.algo)))
}

fn run_train(args: &TrainArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let root = output_root(&cfg);
    if args.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let seeds: Vec<u64> = (cfg.seed..cfg.seed + args.runs).collect();
    let summaries = if seeds.len() == 1 {
        let total = cfg.iterations();
        vec![train_with_progress(&cfg, &root, |r| {
            let mean = if r.episodes.is_empty() {
                String::from("-")
            } else {
                format!(
                    "{:.2}",
                    r.episodes.iter().map(|e| e.total_reward).sum::<f64>() / r.episodes.len() as f64
                )
            };
            eprintln!(
                "iter {:>4}/{total}  step {:>8}  episodes {:>3}  mean reward {mean:>9}  mutations {}/{}",
                r.iteration + 1,
                r.global_step,
                r.episodes.len(),
                r.accepted,
                r.triggered
            );
        })]
    } else {
        poem_core::harness::train_seeds(&cfg, &seeds, &root)
    };
    let mut failed = false;
    for (seed, s) in seeds.iter().zip(summaries) {
        let s = s.with_context(|| format!("seed {seed}"))?;
        println!(
            "seed {seed}: {} iterations, {} steps, mutations {}/{} accepted -> {}",
            s.iterations,
            s.global_step,
            s.mutations_accepted,
            s.mutations_triggered,
            s.final_checkpoint.display()
        );
        if let Some(f) = s.failure {
            eprintln!("seed {seed}: stopped early: {f}");
            failed = true;
        }
    }
    if failed {
        bail!("one or more runs hit a numerical failure");
    }
    Ok(())
}

fn run_id_for(ckpt: &Path) -> String {
    ckpt.parent()
        .and_then(Path::file_name)
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn run_evaluate(args: &EvalArgs) -> Result<()> {
    let options = EvalOptions {
        n_episodes: args.episodes,
        seed_base: args.seed_base,
        deterministic: !args.stochastic,
        env: args.env.as_deref().map(str::parse::<EnvId>).transpose()?,
    };
    let checkpoints = if args.path.is_dir() {
        find_final_checkpoints(&args.path)?
    } else {
        vec![args.path.clone()]
    };
    if checkpoints.is_empty() {
        bail!("no final.bin under {}", args.path.display());
    }
    for ckpt in checkpoints {
        let dir = ckpt.parent().unwrap_or(Path::new(".")).to_path_buf();
        let out = evaluate_checkpoint(&ckpt, &dir, &run_id_for(&ckpt), &options)
            .with_context(|| format!("evaluating {}", ckpt.display()))?;
        println!(
            "{}  {}  mean {:.2}  std {:.2}  over {} episodes -> {}",
            out.env,
            out.run_id,
            out.report.mean,
            out.report.std,
            out.report.per_episode_rewards.len(),
            out.episodes_csv.display()
        );
    }
    Ok(())
}

fn run_compare(args: &CompareArgs) -> Result<()> {
    let unit: SampleUnit = args.unit.parse()?;
    let rows = compare_dirs(&args.poem_dir, &args.ppo_dir, args.alpha, unit)?;
    print!("{}", format_table(&rows));
    if let Some(out) = &args.out {
        write_table(&rows, out)?;
    }
    Ok(())
}

fn run_tune(args: &TuneArgs) -> Result<()> {
    let base = args.run.resolve()?;
    let root = base
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("tune_{}_{}", base.env, base.algo)));
    let spec = TuneSpec {
        relative_bound: args.bound,
        n_trials: args.trials,
        trial_timesteps: args.trial_timesteps,
        eval_episodes: args.eval_episodes,
        seed: base.seed,
        ..TuneSpec::default()
    };
    let result = tune_with_progress(&spec, &base, &root, |t| match &t.error {
        None => eprintln!("trial {:>3}: score {:.2}", t.index, t.score),
        Some(e) => eprintln!("trial {:>3}: failed: {e}", t.index),
    })?;
    let best = &result.trials[result.best];
    println!(
        "best trial {} (score {:.2}) -> {}",
        best.index,
        best.score,
        result.best_config.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train(a) => run_train(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Compare(a) => run_compare(a),
        Command::Tune(a) => run_tune(a),
    }
}
