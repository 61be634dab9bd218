//! Trajectory collection and generalized advantage estimation.

use rand::Rng;

use crate::envs::{Action, Env};
use crate::error::{Error, Result};
use crate::policy::ActorCritic;

pub const ADVANTAGE_STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Action,
    pub log_prob_old: f64,
    pub reward: f64,
    pub value_old: f64,
    pub terminated: bool,
    pub truncated: bool,
    /// `V(s_final)` for a time-limit truncation, used in place of the next
    /// transition's value (which belongs to the following episode).
    pub final_value: Option<f64>,
}

impl Transition {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub total_reward: f64,
    pub steps: usize,
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBatch {
    pub transitions: Vec<Transition>,
    /// Normalized advantages; empty until [`compute_gae`] runs.
    pub advantages: Vec<f64>,
    /// Rewards-to-go `advantage + value_old` (pre-normalization advantage).
    pub returns: Vec<f64>,
    /// Value of the observation following the last transition.
    pub bootstrap_value: f64,
    /// Episodes that finished during collection.
    pub completed_episodes: Vec<EpisodeSummary>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn has_advantages(&self) -> bool {
        self.advantages.len() == self.transitions.len() && self.returns.len() == self.transitions.len()
    }
}

/// Steps an environment under a policy, carrying episodes across calls.
pub struct Collector {
    env: Box<dyn Env>,
    obs: Vec<f64>,
    episode_reward: f64,
    episode_steps: usize,
}

impl Collector {
    pub fn new(mut env: Box<dyn Env>, seed: u64) -> Self {
        let obs = env.reset(Some(seed));
        Self {
            env,
            obs,
            episode_reward: 0.0,
            episode_steps: 0,
        }
    }

    pub fn env(&self) -> &dyn Env {
        self.env.as_ref()
    }

    pub fn collect<R: Rng + ?Sized>(&mut self, ac: &ActorCritic, n_steps: usize, rng: &mut R) -> Result<RolloutBatch> {
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        let mut batch = RolloutBatch {
            transitions: Vec::with_capacity(n_steps),
            ..RolloutBatch::default()
        };
        for _ in 0..n_steps {
            let dist = ac.distribution(&self.obs)?;
            let value_old = ac.value(&self.obs)?;
            let action = dist.sample(rng, false);
            let log_prob_old = dist.log_prob(&action)?;
            if !log_prob_old.is_finite() {
                return Err(Error::Numerical("sampled action has non-finite log-prob".into()));
            }
            let step = self.env.step(&action)?;
            self.episode_reward += step.reward;
            self.episode_steps += 1;
            let final_value = if step.truncated && !step.terminated {
                Some(ac.value(&step.obs)?)
            } else {
                None
            };
            let obs = std::mem::replace(&mut self.obs, step.obs);
            batch.transitions.push(Transition {
                obs,
                action,
                log_prob_old,
                reward: step.reward,
                value_old,
                terminated: step.terminated,
                truncated: step.truncated,
                final_value,
            });
            if step.terminated || step.truncated {
                batch.completed_episodes.push(EpisodeSummary {
                    total_reward: self.episode_reward,
                    steps: self.episode_steps,
                    terminated: step.terminated,
                });
                self.episode_reward = 0.0;
                self.episode_steps = 0;
                self.obs = self.env.reset(None);
            }
        }
        batch.bootstrap_value = ac.value(&self.obs)?;
        Ok(batch)
    }
}

/// One-shot collection from a freshly reset environment.
pub fn collect<R: Rng + ?Sized>(
    env: Box<dyn Env>,
    env_seed: u64,
    ac: &ActorCritic,
    n_steps: usize,
    rng: &mut R,
) -> Result<RolloutBatch> {
    Collector::new(env, env_seed).collect(ac, n_steps, rng)
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

/// Raw GAE(λ) advantages and rewards-to-go, before normalization.
pub fn gae(batch: &RolloutBatch, gamma: f64, lam: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_unit("gamma", gamma)?;
    check_unit("lambda", lam)?;
    let n = batch.len();
    let mut advantages = vec![0.0; n];
    let mut next_advantage = 0.0;
    for t in (0..n).rev() {
        let tr = &batch.transitions[t];
        let next_value = match tr.final_value {
            Some(v) => v,
            None if t + 1 < n => batch.transitions[t + 1].value_old,
            None => batch.bootstrap_value,
        };
        let bootstrap = if tr.terminated { 0.0 } else { gamma * next_value };
        let delta = tr.reward + bootstrap - tr.value_old;
        let carry = if tr.done() { 0.0 } else { gamma * lam * next_advantage };
        advantages[t] = delta + carry;
        next_advantage = advantages[t];
    }
    let returns = advantages
        .iter()
        .zip(&batch.transitions)
        .map(|(a, tr)| a + tr.value_old)
        .collect();
    Ok((advantages, returns))
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(ADVANTAGE_STD_FLOOR);
    for v in values.iter_mut() {
        *v = (*v - mean) / std;
    }
}

/// Fills `returns` and per-batch normalized `advantages`.
pub fn compute_gae(batch: &mut RolloutBatch, gamma: f64, lam: f64) -> Result<()> {
    let (mut advantages, returns) = gae(batch, gamma, lam)?;
    normalize(&mut advantages);
    batch.advantages = advantages;
    batch.returns = returns;
    Ok(())
}
