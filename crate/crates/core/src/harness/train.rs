//! Training driver: collect, advantages, update, log, checkpoint.

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::Checkpoint;
use super::config::{Algo, RunConfig};
use super::csv_err;
use crate::envs::make_env;
use crate::error::{Error, Result};
use crate::nn::AdamState;
use crate::poem::{poem_update, EmaTracker};
use crate::policy::ActorCritic;
use crate::ppo::{ppo_update, UpdateDiagnostics};
use crate::rollout::{compute_gae, Collector, EpisodeSummary};

pub const METRICS_HEADER: [&str; 16] = [
    "global_step",
    "iteration",
    "epoch",
    "minibatch_idx",
    "l_ppo",
    "l_vf",
    "entropy",
    "kl_div",
    "l_total",
    "grad_norm",
    "d_post",
    "sigma",
    "triggered",
    "accepted",
    "l_total_before",
    "l_total_after",
];

/// Independent generator seeds derived from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    pub env: u64,
    pub init: u64,
    pub action: u64,
    pub shuffle: u64,
    pub mutation: u64,
}

impl SeedStreams {
    pub fn derive(seed: u64) -> Self {
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        Self {
            env: master.random(),
            init: master.random(),
            action: master.random(),
            shuffle: master.random(),
            mutation: master.random(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    pub global_step: usize,
    pub episodes: Vec<EpisodeSummary>,
    pub triggered: usize,
    pub accepted: usize,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub output_dir: PathBuf,
    pub final_checkpoint: PathBuf,
    pub iterations: usize,
    pub global_step: usize,
    pub episodes: Vec<EpisodeSummary>,
    pub mutations_triggered: usize,
    pub mutations_accepted: usize,
    /// Set when training stopped on a numerical failure.
    pub failure: Option<String>,
    pub policy: ActorCritic,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_metrics(
    w: &mut csv::Writer<File>,
    path: &Path,
    global_step: usize,
    iteration: usize,
    diag: &UpdateDiagnostics,
) -> Result<()> {
    for r in &diag.minibatches {
        let l = &r.losses;
        let mut row = vec![
            global_step.to_string(),
            iteration.to_string(),
            r.epoch.to_string(),
            r.minibatch.to_string(),
            l.l_ppo.to_string(),
            l.l_vf.to_string(),
            l.entropy.to_string(),
            l.kl_div.to_string(),
            l.l_total.to_string(),
            r.grad_norm.to_string(),
        ];
        match &r.diversity {
            Some(m) => row.extend([
                m.d_post.to_string(),
                opt(m.sigma_used),
                m.mutation_triggered.to_string(),
                m.mutation_accepted.to_string(),
                m.l_total_before.to_string(),
                opt(m.l_total_after),
            ]),
            None => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn create_csv(path: &Path, header: &[&str]) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    Ok(w)
}

/// Trains into `out_dir`, which is created if needed.
pub fn train(config: &RunConfig, out_dir: &Path) -> Result<TrainSummary> {
    train_with_progress(config, out_dir, |_| {})
}

pub fn train_with_progress(
    config: &RunConfig,
    out_dir: &Path,
    mut progress: impl FnMut(&IterationReport),
) -> Result<TrainSummary> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let snapshot = out_dir.join("config.toml");
    std::fs::write(&snapshot, config.to_toml()).map_err(|e| Error::io(&snapshot, e))?;

    let seeds = SeedStreams::derive(config.seed);
    let env = make_env(config.env, seeds.env)?;
    let mut ac = ActorCritic::new(
        env.observation_dim(),
        &env.action_space(),
        &config.hidden,
        env.observation_scale(),
        seeds.init,
    )?;
    let mut collector = Collector::new(env, seeds.env);
    let mut ema = EmaTracker::new(ac.params(), config.poem.beta);
    let mut adam = AdamState::new(ac.params().len(), config.ppo.learning_rate);
    let mut action_rng = ChaCha8Rng::seed_from_u64(seeds.action);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seeds.shuffle);
    let mut mutation_rng = ChaCha8Rng::seed_from_u64(seeds.mutation);

    let metrics_path = out_dir.join("metrics.csv");
    let mut metrics = create_csv(&metrics_path, &METRICS_HEADER)?;
    let episodes_path = out_dir.join("train_episodes.csv");
    let mut episodes_csv = create_csv(
        &episodes_path,
        &[
            "iteration",
            "global_step",
            "episode",
            "total_reward",
            "steps",
            "terminated",
        ],
    )?;

    let mut global_step = 0;
    let mut all_episodes = Vec::new();
    let (mut triggered, mut accepted) = (0, 0);
    let mut failure = None;
    let mut completed = 0;

    for iteration in 0..config.iterations() {
        let last_good = ac.clone();
        let step = (|| -> Result<(UpdateDiagnostics, Vec<EpisodeSummary>)> {
            let mut batch = collector.collect(&ac, config.n_steps, &mut action_rng)?;
            compute_gae(&mut batch, config.ppo.gamma, config.ppo.lam)?;
            let diag = match config.algo {
                Algo::Ppo => ppo_update(&mut ac, &batch, &config.ppo, &mut adam, &mut shuffle_rng)?,
                Algo::Poem => poem_update(
                    &mut ac,
                    &mut ema,
                    &batch,
                    &config.ppo,
                    &config.poem,
                    &mut adam,
                    &mut shuffle_rng,
                    &mut mutation_rng,
                )?,
            };
            Ok((diag, batch.completed_episodes))
        })();
        let (diag, episodes) = match step {
            Ok(v) => v,
            Err(Error::Numerical(m)) => {
                ac = last_good;
                let msg = format!("iteration {iteration}: {m}");
                let path = out_dir.join("failure.txt");
                std::fs::write(&path, format!("{msg}\n")).map_err(|e| Error::io(&path, e))?;
                failure = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        global_step += config.n_steps;
        completed = iteration + 1;

        write_metrics(&mut metrics, &metrics_path, global_step, iteration, &diag)?;
        for ep in &episodes {
            episodes_csv
                .write_record([
                    iteration.to_string(),
                    global_step.to_string(),
                    all_episodes.len().to_string(),
                    ep.total_reward.to_string(),
                    ep.steps.to_string(),
                    ep.terminated.to_string(),
                ])
                .map_err(|e| csv_err(&episodes_path, e))?;
            all_episodes.push(ep.clone());
        }
        episodes_csv.flush().map_err(|e| Error::io(&episodes_path, e))?;

        let (mut t, mut a) = (0, 0);
        for m in diag.minibatches.iter().filter_map(|r| r.diversity.as_ref()) {
            t += m.mutation_triggered as usize;
            a += m.mutation_accepted as usize;
        }
        triggered += t;
        accepted += a;

        if config.checkpoint_every > 0 && completed % config.checkpoint_every == 0 {
            Checkpoint::new(config.env, config.algo, &ac, completed, global_step)
                .save(&out_dir.join(format!("checkpoint_{completed:05}.bin")))?;
        }
        progress(&IterationReport {
            iteration,
            global_step,
            episodes,
            triggered: t,
            accepted: a,
        });
    }

    let final_checkpoint = out_dir.join("final.bin");
    Checkpoint::new(config.env, config.algo, &ac, completed, global_step).save(&final_checkpoint)?;
    Ok(TrainSummary {
        output_dir: out_dir.to_path_buf(),
        final_checkpoint,
        iterations: completed,
        global_step,
        episodes: all_episodes,
        mutations_triggered: triggered,
        mutations_accepted: accepted,
        failure,
        policy: ac,
    })
}
