//! Browser bindings: the mutation scale schedule, the Monte-Carlo KL
//! estimator, and a mountain car rollout.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use poem_core::envs::{Action, ActionSpace, Env, MountainCarContinuous, ObsScale};
use poem_core::poem::{kl_divergence_mc, mutation_sigma, PoemConfig};
use poem_core::policy::ActorCritic;
use poem_core::rollout::{RolloutBatch, Transition};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn js_err(e: poem_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `σ` for `points` values of `d_post` spread over `[-δ, 2δ]`, as
/// interleaved `[d_post, σ, ...]` pairs.
#[wasm_bindgen]
pub fn sigma_schedule(delta: f64, sigma_min: f64, sigma_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let cfg = PoemConfig {
        delta,
        sigma_min,
        sigma_max,
        ..PoemConfig::default()
    };
    cfg.validate().map_err(js_err)?;
    if !(delta > 0.0) {
        return Err(JsError::new("delta must be positive"));
    }
    let n = points.max(2);
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let d = -delta + 3.0 * delta * i as f64 / (n - 1) as f64;
        out.push(d);
        out.push(mutation_sigma(d, &cfg));
    }
    Ok(out)
}

/// Closed-form `D_KL(N(m1, s1²) ‖ N(m2, s2²))`.
#[wasm_bindgen]
pub fn gaussian_kl(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    (s2 / s1).ln() + (s1 * s1 + (m1 - m2).powi(2)) / (2.0 * s2 * s2) - 0.5
}

/// One-dimensional Gaussian policy whose mean and std ignore the state.
fn constant_policy(mean: f64, std: f64) -> Result<ActorCritic, poem_core::Error> {
    let space = ActionSpace::Continuous {
        dim: 1,
        low: -1.0,
        high: 1.0,
    };
    let mut ac = ActorCritic::new(1, &space, &[2], ObsScale::identity(1), 0)?;
    let mut p = ac.params().clone();
    for i in ac.actor_range() {
        p[i] = 0.0;
    }
    p[ac.actor_range().end - 1] = mean;
    p[ac.log_std_range().start] = std.ln();
    ac.set_params(p)?;
    Ok(ac)
}

/// Running Monte-Carlo KL estimate after each of `n` samples drawn from the
/// first Gaussian.
#[wasm_bindgen]
pub fn kl_running_estimate(m1: f64, s1: f64, m2: f64, s2: f64, n: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    if !(s1 > 0.0 && s2 > 0.0) {
        return Err(JsError::new("standard deviations must be positive"));
    }
    let ac = constant_policy(m1, s1).map_err(js_err)?;
    let reference = constant_policy(m2, s2).map_err(js_err)?.params().clone();
    let dist = ac.distribution(&[0.0]).map_err(js_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.into());
    let mut batch = RolloutBatch::default();
    let mut out = Vec::with_capacity(n);
    let mut sum = 0.0;
    for k in 1..=n {
        batch.transitions.clear();
        batch.transitions.push(Transition {
            obs: vec![0.0],
            action: dist.sample(&mut rng, false),
            log_prob_old: 0.0,
            reward: 0.0,
            value_old: 0.0,
            terminated: false,
            truncated: false,
            final_value: None,
        });
        sum += kl_divergence_mc(&ac, &reference, &batch).map_err(js_err)?;
        out.push(sum / k as f64);
    }
    Ok(out)
}

#[wasm_bindgen]
pub struct Trajectory {
    positions: Vec<f64>,
    velocities: Vec<f64>,
    total_reward: f64,
    reached_goal: bool,
}

#[wasm_bindgen]
impl Trajectory {
    pub fn positions(&self) -> Vec<f64> {
        self.positions.clone()
    }

    pub fn velocities(&self) -> Vec<f64> {
        self.velocities.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    #[wasm_bindgen(getter)]
    pub fn reached_goal(&self) -> bool {
        self.reached_goal
    }
}

/// Mountain car under a bang-bang controller that pushes with `throttle`
/// in the direction of motion.
#[wasm_bindgen]
pub fn mountain_car_rollout(throttle: f64, seed: u32) -> Result<Trajectory, JsError> {
    let mut env = MountainCarContinuous::new(seed.into());
    let obs = env.reset(Some(seed.into()));
    let mut t = Trajectory {
        positions: vec![obs[0]],
        velocities: vec![obs[1]],
        total_reward: 0.0,
        reached_goal: false,
    };
    loop {
        let v = env.state().velocity;
        let a = if v >= 0.0 { throttle } else { -throttle };
        let step = env.step(&Action::Continuous(vec![a])).map_err(js_err)?;
        t.positions.push(step.obs[0]);
        t.velocities.push(step.obs[1]);
        t.total_reward += step.reward;
        if step.done() {
            t.reached_goal = step.terminated;
            return Ok(t);
        }
    }
}
