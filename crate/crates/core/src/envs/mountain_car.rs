use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Action, ActionSpace, Env, EnvId, ObsScale, Phase, StepResult};
use crate::error::{Error, Result};

const MIN_POSITION: f64 = -1.2;
const MAX_POSITION: f64 = 0.6;
const MAX_SPEED: f64 = 0.07;
const GOAL_POSITION: f64 = 0.45;
const POWER: f64 = 0.0015;
const GRAVITY: f64 = 0.0025;
const GOAL_REWARD: f64 = 100.0;
const ACTION_COST: f64 = 0.1;
pub const MAX_EPISODE_STEPS: usize = 999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountainCarState {
    pub position: f64,
    pub velocity: f64,
}

impl MountainCarState {
    /// One step of the classic-control dynamics. Returns the next state,
    /// the reward and whether the goal was reached.
    pub fn advance(self, action: f64) -> (MountainCarState, f64, bool) {
        let force = action.clamp(-1.0, 1.0);
        let mut velocity = self.velocity + force * POWER - GRAVITY * (3.0 * self.position).cos();
        velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
        let mut position = (self.position + velocity).clamp(MIN_POSITION, MAX_POSITION);
        if position <= MIN_POSITION && velocity < 0.0 {
            velocity = 0.0;
            position = MIN_POSITION;
        }
        let reached = position >= GOAL_POSITION;
        let mut reward = -ACTION_COST * force * force;
        if reached {
            reward += GOAL_REWARD;
        }
        (MountainCarState { position, velocity }, reward, reached)
    }
}

/// Continuous-action mountain car: observation `[position, velocity]`,
/// action a throttle clipped to `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct MountainCarContinuous {
    state: MountainCarState,
    steps: usize,
    phase: Phase,
    rng: ChaCha8Rng,
}

impl MountainCarContinuous {
    pub fn new(seed: u64) -> Self {
        Self {
            state: MountainCarState {
                position: -0.5,
                velocity: 0.0,
            },
            steps: 0,
            phase: Phase::NeedsReset,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn state(&self) -> MountainCarState {
        self.state
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.state.position, self.state.velocity]
    }
}

impl Env for MountainCarContinuous {
    fn id(&self) -> EnvId {
        EnvId::MountainCarContinuous
    }

    fn observation_dim(&self) -> usize {
        2
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous {
            dim: 1,
            low: -1.0,
            high: 1.0,
        }
    }

    fn max_episode_steps(&self) -> usize {
        MAX_EPISODE_STEPS
    }

    fn observation_scale(&self) -> ObsScale {
        ObsScale::from_bounds(&[MIN_POSITION, -MAX_SPEED], &[MAX_POSITION, MAX_SPEED])
    }

    fn reset(&mut self, seed: Option<u64>) -> Vec<f64> {
        if let Some(seed) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        self.state = MountainCarState {
            position: self.rng.random_range(-0.6..=-0.4),
            velocity: 0.0,
        };
        self.steps = 0;
        self.phase = Phase::Running;
        self.obs()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        self.phase.check_step(self.id())?;
        let a = match action {
            Action::Continuous(v) if v.len() == 1 => v[0],
            Action::Continuous(v) => return Err(Error::dims("mountain car action", 1, v.len())),
            Action::Discrete(_) => return Err(Error::Env("mountain car expects a continuous action".into())),
        };
        if !a.is_finite() {
            return Err(Error::Env(format!("non-finite action {a}")));
        }
        let (next, reward, terminated) = self.state.advance(a);
        self.state = next;
        self.steps += 1;
        let truncated = !terminated && self.steps >= MAX_EPISODE_STEPS;
        if terminated || truncated {
            self.phase = Phase::NeedsReset;
        }
        Ok(StepResult {
            obs: self.obs(),
            reward,
            terminated,
            truncated,
            info: BTreeMap::new(),
        })
    }
}
