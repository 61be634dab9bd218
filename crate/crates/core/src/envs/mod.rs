//! Gym-style environments with a uniform `reset`/`step` facade.

mod mountain_car;
mod sparse_lander;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use mountain_car::{MountainCarContinuous, MountainCarState};
pub use sparse_lander::{
    LanderAction, LanderState, SparseLander, Touchdown, ARENA_HALF_WIDTH, FULL_TANK, MAIN_FUEL_COST, MAX_EPISODE_STEPS,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Continuous(Vec<f64>),
    Discrete(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    Continuous { dim: usize, low: f64, high: f64 },
    Discrete(usize),
}

impl ActionSpace {
    /// Width of the policy head's output for this space.
    pub fn head_dim(&self) -> usize {
        match *self {
            ActionSpace::Continuous { dim, .. } => dim,
            ActionSpace::Discrete(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: BTreeMap<&'static str, f64>,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// Fixed affine observation normalization `(obs - offset) * scale`.
///
/// Environments publish one derived from their documented observation
/// ranges; the policy applies it before the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsScale {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ObsScale {
    pub fn identity(dim: usize) -> Self {
        Self {
            offset: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Maps `[low, high]` onto `[-1, 1]` per dimension.
    pub fn from_bounds(low: &[f64], high: &[f64]) -> Self {
        Self {
            offset: low.iter().zip(high).map(|(l, h)| 0.5 * (l + h)).collect(),
            scale: low.iter().zip(high).map(|(l, h)| 2.0 / (h - l)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, obs: &[f64]) -> Vec<f64> {
        obs.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(x, (o, s))| (x - o) * s)
            .collect()
    }
}

pub trait Env: Send {
    fn id(&self) -> EnvId;
    fn observation_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpace;
    fn max_episode_steps(&self) -> usize;
    fn observation_scale(&self) -> ObsScale;
    /// Starts a new episode; `Some(seed)` reseeds the environment's generator first.
    fn reset(&mut self, seed: Option<u64>) -> Vec<f64>;
    fn step(&mut self, action: &Action) -> Result<StepResult>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvId {
    MountainCarContinuous,
    SparseLander,
    /// Test double; not constructible through [`make_env`].
    Custom(&'static str),
}

impl EnvId {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvId::MountainCarContinuous => "mountain_car_continuous",
            EnvId::SparseLander => "sparse_lander",
            EnvId::Custom(name) => name,
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mountain_car_continuous" => Ok(EnvId::MountainCarContinuous),
            "sparse_lander" => Ok(EnvId::SparseLander),
            other => Err(Error::InvalidArgument(format!(
                "unknown env id {other:?} (expected mountain_car_continuous or sparse_lander)"
            ))),
        }
    }
}

pub fn make_env(id: EnvId, seed: u64) -> Result<Box<dyn Env>> {
    match id {
        EnvId::MountainCarContinuous => Ok(Box::new(MountainCarContinuous::new(seed))),
        EnvId::SparseLander => Ok(Box::new(SparseLander::new(seed))),
        EnvId::Custom(name) => Err(Error::InvalidArgument(format!(
            "env {name:?} cannot be constructed by id"
        ))),
    }
}

/// Tracks the reset/step protocol shared by every environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Phase {
    NeedsReset,
    Running,
}

impl Phase {
    pub(crate) fn check_step(self, env: EnvId) -> Result<()> {
        match self {
            Phase::Running => Ok(()),
            Phase::NeedsReset => Err(Error::Env(format!(
                "{env}: step called before reset or after the episode ended"
            ))),
        }
    }
}
