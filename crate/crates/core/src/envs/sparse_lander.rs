//! Point-mass lander with a finite fuel tank.
//!
//! Firing the main engine burns 3 units per step, a side engine 1 unit. An
//! empty tank disables the engines but does not end the episode: gravity
//! carries the lander down to either a safe landing or a crash.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Action, ActionSpace, Env, EnvId, ObsScale, Phase, StepResult};
use crate::error::{Error, Result};

pub const FULL_TANK: f64 = 600.0;
pub const DT: f64 = 0.05;
pub const GRAVITY: f64 = 9.8;
pub const MAIN_THRUST: f64 = 15.0;
pub const SIDE_THRUST: f64 = 4.0;
pub const MAIN_FUEL_COST: f64 = 3.0;
pub const SIDE_FUEL_COST: f64 = 1.0;
pub const START_HEIGHT: f64 = 10.0;
pub const PAD_HALF_WIDTH: f64 = 0.5;
pub const SAFE_SPEED: f64 = 1.0;
pub const ARENA_HALF_WIDTH: f64 = 5.0;
pub const LANDING_REWARD: f64 = 100.0;
pub const MAX_EPISODE_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LanderAction {
    Noop,
    Main,
    Left,
    Right,
}

impl LanderAction {
    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(LanderAction::Noop),
            1 => Ok(LanderAction::Main),
            2 => Ok(LanderAction::Left),
            3 => Ok(LanderAction::Right),
            _ => Err(Error::Env(format!("lander action index {i} outside 0..4"))),
        }
    }

    fn fuel_cost(self) -> f64 {
        match self {
            LanderAction::Noop => 0.0,
            LanderAction::Main => MAIN_FUEL_COST,
            LanderAction::Left | LanderAction::Right => SIDE_FUEL_COST,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanderState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub fuel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Touchdown {
    Airborne,
    Landed,
    Crashed,
}

impl LanderState {
    /// Semi-implicit Euler step. Returns the next state, the action that
    /// actually fired, and the touchdown outcome.
    pub fn advance(self, requested: LanderAction) -> (LanderState, LanderAction, Touchdown) {
        let fired = if self.fuel >= requested.fuel_cost() {
            requested
        } else {
            LanderAction::Noop
        };
        let (ax, ay) = match fired {
            LanderAction::Noop => (0.0, -GRAVITY),
            LanderAction::Main => (0.0, MAIN_THRUST - GRAVITY),
            LanderAction::Left => (-SIDE_THRUST, -GRAVITY),
            LanderAction::Right => (SIDE_THRUST, -GRAVITY),
        };
        let vx = self.vx + ax * DT;
        let vy = self.vy + ay * DT;
        let x = self.x + vx * DT;
        let mut y = self.y + vy * DT;
        let fuel = (self.fuel - fired.fuel_cost()).max(0.0);

        let touchdown = if x.abs() > ARENA_HALF_WIDTH {
            Touchdown::Crashed
        } else if y <= 0.0 {
            y = 0.0;
            if x.abs() <= PAD_HALF_WIDTH && vy.abs() <= SAFE_SPEED && vx.abs() <= SAFE_SPEED {
                Touchdown::Landed
            } else {
                Touchdown::Crashed
            }
        } else {
            Touchdown::Airborne
        };
        (LanderState { x, y, vx, vy, fuel }, fired, touchdown)
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.x, self.y, self.vx, self.vy, self.fuel / FULL_TANK]
    }
}

/// Discrete actions `{0: noop, 1: main, 2: left, 3: right}`; observation
/// `[x, y, vx, vy, fuel / 600]`.
#[derive(Debug, Clone)]
pub struct SparseLander {
    state: LanderState,
    steps: usize,
    phase: Phase,
    rng: ChaCha8Rng,
}

impl SparseLander {
    pub fn new(seed: u64) -> Self {
        Self {
            state: LanderState {
                x: 0.0,
                y: START_HEIGHT,
                vx: 0.0,
                vy: 0.0,
                fuel: FULL_TANK,
            },
            steps: 0,
            phase: Phase::NeedsReset,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn state(&self) -> LanderState {
        self.state
    }
}

impl Env for SparseLander {
    fn id(&self) -> EnvId {
        EnvId::SparseLander
    }

    fn observation_dim(&self) -> usize {
        5
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(4)
    }

    fn max_episode_steps(&self) -> usize {
        MAX_EPISODE_STEPS
    }

    fn observation_scale(&self) -> ObsScale {
        ObsScale::from_bounds(
            &[-ARENA_HALF_WIDTH, 0.0, -5.0, -10.0, 0.0],
            &[ARENA_HALF_WIDTH, 2.0 * START_HEIGHT, 5.0, 10.0, 1.0],
        )
    }

    fn reset(&mut self, seed: Option<u64>) -> Vec<f64> {
        if let Some(seed) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        self.state = LanderState {
            x: self.rng.random_range(-1.0..=1.0),
            y: START_HEIGHT,
            vx: self.rng.random_range(-0.5..=0.5),
            vy: self.rng.random_range(-0.5..=0.5),
            fuel: FULL_TANK,
        };
        self.steps = 0;
        self.phase = Phase::Running;
        self.state.observation()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        self.phase.check_step(self.id())?;
        let requested = match *action {
            Action::Discrete(i) => LanderAction::from_index(i)?,
            Action::Continuous(_) => return Err(Error::Env("sparse lander expects a discrete action".into())),
        };
        let (next, fired, touchdown) = self.state.advance(requested);
        self.state = next;
        self.steps += 1;

        let main_fired = if fired == LanderAction::Main { 1.0 } else { 0.0 };
        let mut reward = -0.3 * (next.x.abs() + next.vx.abs() + next.vy.abs()) * DT - 0.03 * main_fired;
        let terminated = match touchdown {
            Touchdown::Airborne => false,
            Touchdown::Landed => {
                reward += LANDING_REWARD;
                true
            }
            Touchdown::Crashed => {
                reward -= LANDING_REWARD;
                true
            }
        };
        let truncated = !terminated && self.steps >= MAX_EPISODE_STEPS;
        if terminated || truncated {
            self.phase = Phase::NeedsReset;
        }
        let mut info = BTreeMap::new();
        info.insert("fuel", next.fuel);
        info.insert("landed", (touchdown == Touchdown::Landed) as u8 as f64);
        info.insert("crashed", (touchdown == Touchdown::Crashed) as u8 as f64);
        Ok(StepResult {
            obs: next.observation(),
            reward,
            terminated,
            truncated,
            info,
        })
    }
}
