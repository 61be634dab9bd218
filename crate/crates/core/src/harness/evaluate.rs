//! Checkpoint evaluation with per-episode and per-step CSV output.

use std::path::{Path, PathBuf};

use super::checkpoint::Checkpoint;
use super::csv_err;
use crate::envs::{make_env, EnvId};
use crate::error::{Error, Result};
use crate::eval::{evaluate_policy, EvalReport};

pub const DEFAULT_EPISODES: usize = 15;
pub const DEFAULT_SEED_BASE: u64 = 1_000_000;
pub const EPISODES_FILE: &str = "eval_episodes.csv";
pub const STEPS_FILE: &str = "eval_steps.csv";
pub const EPISODES_HEADER: [&str; 7] = ["algo", "env", "run_id", "episode", "seed", "total_reward", "steps"];
pub const STEPS_HEADER: [&str; 5] = ["algo", "env", "episode", "step", "cumulative_reward"];

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub n_episodes: usize,
    pub seed_base: u64,
    pub deterministic: bool,
    /// Overrides the env recorded in the checkpoint.
    pub env: Option<EnvId>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            n_episodes: DEFAULT_EPISODES,
            seed_base: DEFAULT_SEED_BASE,
            deterministic: true,
            env: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub env: EnvId,
    pub run_id: String,
    pub episodes_csv: PathBuf,
    pub steps_csv: PathBuf,
}

/// Loads `checkpoint`, evaluates it, and writes both CSVs into `out_dir`.
/// Nothing is written unless loading and every episode succeed.
pub fn evaluate_checkpoint(
    checkpoint: &Path,
    out_dir: &Path,
    run_id: &str,
    options: &EvalOptions,
) -> Result<EvalOutput> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let env_id = match options.env {
        Some(id) => id,
        None => ckpt.env_id()?,
    };
    let mut env = make_env(env_id, options.seed_base)?;
    ckpt.check_compatible(env.as_ref())?;
    let report = evaluate_policy(
        env.as_mut(),
        &ckpt.policy,
        options.n_episodes,
        options.seed_base,
        options.deterministic,
    )?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let algo = ckpt.header.algo.as_str();
    let episodes_csv = out_dir.join(EPISODES_FILE);
    let mut w = csv::Writer::from_path(&episodes_csv).map_err(|e| csv_err(&episodes_csv, e))?;
    w.write_record(EPISODES_HEADER).map_err(|e| csv_err(&episodes_csv, e))?;
    for (i, ep) in report.episodes.iter().enumerate() {
        w.write_record([
            algo,
            env_id.as_str(),
            run_id,
            &i.to_string(),
            &ep.seed.to_string(),
            &ep.total_reward.to_string(),
            &ep.steps.to_string(),
        ])
        .map_err(|e| csv_err(&episodes_csv, e))?;
    }
    w.flush().map_err(|e| Error::io(&episodes_csv, e))?;

    let steps_csv = out_dir.join(STEPS_FILE);
    let mut w = csv::Writer::from_path(&steps_csv).map_err(|e| csv_err(&steps_csv, e))?;
    w.write_record(STEPS_HEADER).map_err(|e| csv_err(&steps_csv, e))?;
    for (i, ep) in report.episodes.iter().enumerate() {
        for (t, c) in ep.cumulative_rewards.iter().enumerate() {
            w.write_record([
                algo,
                env_id.as_str(),
                &i.to_string(),
                &(t + 1).to_string(),
                &c.to_string(),
            ])
            .map_err(|e| csv_err(&steps_csv, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&steps_csv, e))?;

    Ok(EvalOutput {
        report,
        env: env_id,
        run_id: run_id.to_string(),
        episodes_csv,
        steps_csv,
    })
}

/// Every `final.bin` under `root`, in sorted path order.
pub fn find_final_checkpoints(root: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    super::walk(root, &mut |p| {
        if p.file_name().is_some_and(|n| n == "final.bin") {
            found.push(p.to_path_buf());
        }
    })?;
    found.sort();
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{Algo, RunConfig};
    use crate::harness::train::train;

    fn trained(dir: &Path) -> PathBuf {
        let mut cfg = RunConfig::defaults(EnvId::SparseLander, Algo::Poem);
        cfg.n_steps = 128;
        cfg.total_timesteps = 128;
        cfg.hidden = vec![8];
        cfg.ppo.epochs = 1;
        train(&cfg, dir).unwrap().final_checkpoint
    }

    #[test]
    fn writes_one_row_per_episode() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = trained(dir.path());
        let out = evaluate_checkpoint(&ckpt, dir.path(), "seed_0", &EvalOptions::default()).unwrap();
        assert_eq!(out.report.per_episode_rewards.len(), 15);
        let mut r = csv::Reader::from_path(&out.episodes_csv).unwrap();
        assert_eq!(r.headers().unwrap(), EPISODES_HEADER.as_slice());
        assert_eq!(r.records().count(), 15);
        let steps: usize = out.report.per_episode_steps.iter().sum();
        assert_eq!(csv::Reader::from_path(&out.steps_csv).unwrap().records().count(), steps);
    }

    #[test]
    fn repeated_evaluation_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = trained(dir.path());
        let opts = EvalOptions {
            n_episodes: 3,
            ..EvalOptions::default()
        };
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        evaluate_checkpoint(&ckpt, &a, "r", &opts).unwrap();
        evaluate_checkpoint(&ckpt, &b, "r", &opts).unwrap();
        for f in [EPISODES_FILE, STEPS_FILE] {
            assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        }
    }

    #[test]
    fn corrupt_checkpoint_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.bin");
        std::fs::write(&bad, b"POEMCKPT\x01\x00\x00\x00garbage").unwrap();
        let out = dir.path().join("out");
        assert!(evaluate_checkpoint(&bad, &out, "r", &EvalOptions::default()).is_err());
        assert!(!out.join(EPISODES_FILE).exists());
    }

    #[test]
    fn env_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = trained(dir.path());
        let opts = EvalOptions {
            env: Some(EnvId::MountainCarContinuous),
            ..EvalOptions::default()
        };
        let out = dir.path().join("out");
        assert!(evaluate_checkpoint(&ckpt, &out, "r", &opts).is_err());
        assert!(!out.exists());
    }
}
