//! Seeded policy evaluation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{make_env, Env, EnvId};
use crate::error::{Error, Result};
use crate::policy::ActorCritic;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub total_reward: f64,
    pub steps: usize,
    pub terminated: bool,
    /// Final value of each `info` key, e.g. remaining fuel.
    pub final_info: Vec<(&'static str, f64)>,
    /// Running reward sum after each step.
    pub cumulative_rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_episode_rewards: Vec<f64>,
    pub per_episode_steps: Vec<usize>,
    pub seeds: Vec<u64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub episodes: Vec<EpisodeTrace>,
}

impl EvalReport {
    pub fn from_episodes(episodes: Vec<EpisodeTrace>) -> Self {
        let rewards: Vec<f64> = episodes.iter().map(|e| e.total_reward).collect();
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let std = (rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).sqrt();
        Self {
            per_episode_steps: episodes.iter().map(|e| e.steps).collect(),
            seeds: episodes.iter().map(|e| e.seed).collect(),
            per_episode_rewards: rewards,
            mean,
            std,
            episodes,
        }
    }
}

pub fn run_episode(env: &mut dyn Env, ac: &ActorCritic, seed: u64, deterministic: bool) -> Result<EpisodeTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = env.reset(Some(seed));
    let mut total = 0.0;
    let mut cumulative_rewards = Vec::new();
    let limit = env.max_episode_steps();
    loop {
        let action = ac.distribution(&obs)?.sample(&mut rng, deterministic);
        let step = env.step(&action)?;
        total += step.reward;
        cumulative_rewards.push(total);
        if step.done() {
            return Ok(EpisodeTrace {
                seed,
                total_reward: total,
                steps: cumulative_rewards.len(),
                terminated: step.terminated,
                final_info: step.info.into_iter().collect(),
                cumulative_rewards,
            });
        }
        if cumulative_rewards.len() > limit {
            return Err(Error::Env(format!(
                "{} ran past its {limit}-step limit without ending",
                env.id()
            )));
        }
        obs = step.obs;
    }
}

/// Episode `i` resets with seed `seed_base + i`. `deterministic` picks the
/// distribution mode instead of sampling.
pub fn evaluate_policy(
    env: &mut dyn Env,
    ac: &ActorCritic,
    n_episodes: usize,
    seed_base: u64,
    deterministic: bool,
) -> Result<EvalReport> {
    if n_episodes == 0 {
        return Err(Error::InvalidArgument("n_episodes must be at least 1".into()));
    }
    let episodes = (0..n_episodes as u64)
        .map(|i| run_episode(env, ac, seed_base + i, deterministic))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_episodes(episodes))
}

pub fn evaluate_on(
    env_id: EnvId,
    ac: &ActorCritic,
    n_episodes: usize,
    seed_base: u64,
    deterministic: bool,
) -> Result<EvalReport> {
    let mut env = make_env(env_id, seed_base)?;
    evaluate_policy(env.as_mut(), ac, n_episodes, seed_base, deterministic)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::envs::{Action, ActionSpace, ObsScale, StepResult};

    struct OneStep;

    impl Env for OneStep {
        fn id(&self) -> EnvId {
            EnvId::Custom("one_step")
        }
        fn observation_dim(&self) -> usize {
            1
        }
        fn action_space(&self) -> ActionSpace {
            ActionSpace::Discrete(2)
        }
        fn max_episode_steps(&self) -> usize {
            1
        }
        fn observation_scale(&self) -> ObsScale {
            ObsScale::identity(1)
        }
        fn reset(&mut self, _seed: Option<u64>) -> Vec<f64> {
            vec![0.0]
        }
        fn step(&mut self, _action: &Action) -> Result<StepResult> {
            Ok(StepResult {
                obs: vec![0.0],
                reward: 1.0,
                terminated: true,
                truncated: false,
                info: BTreeMap::new(),
            })
        }
    }

    fn policy_for(env: &dyn Env, seed: u64) -> ActorCritic {
        ActorCritic::new(
            env.observation_dim(),
            &env.action_space(),
            &[16, 16],
            env.observation_scale(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn constant_reward_stub() {
        let mut env = OneStep;
        let ac = policy_for(&env, 0);
        let r = evaluate_policy(&mut env, &ac, 15, 100, true).unwrap();
        assert_eq!(r.per_episode_rewards.len(), 15);
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.std, 0.0);
        assert_eq!(r.seeds, (100..115).collect::<Vec<_>>());
        assert!(evaluate_policy(&mut env, &ac, 0, 0, true).is_err());
    }

    #[test]
    fn replay_is_bit_identical() {
        for id in [EnvId::MountainCarContinuous, EnvId::SparseLander] {
            let env = make_env(id, 0).unwrap();
            let ac = policy_for(env.as_ref(), 3);
            for deterministic in [true, false] {
                let a = evaluate_on(id, &ac, 2, 1_000_000, deterministic).unwrap();
                let b = evaluate_on(id, &ac, 2, 1_000_000, deterministic).unwrap();
                assert_eq!(a, b);
                for ep in &a.episodes {
                    assert_eq!(ep.cumulative_rewards.len(), ep.steps);
                    assert_eq!(*ep.cumulative_rewards.last().unwrap(), ep.total_reward);
                }
            }
        }
    }

    #[test]
    fn std_is_recomputable() {
        let env = make_env(EnvId::SparseLander, 0).unwrap();
        let ac = policy_for(env.as_ref(), 9);
        let r = evaluate_on(EnvId::SparseLander, &ac, 5, 7, false).unwrap();
        let m = r.per_episode_rewards.iter().sum::<f64>() / 5.0;
        assert!((m - r.mean).abs() < 1e-12);
        let v = r.per_episode_rewards.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 5.0;
        assert!((v.sqrt() - r.std).abs() < 1e-9);
    }
}
