//! Analytic gradients against central finite differences on random small
//! actor-critics and batches.

use poem_core::autodiff::Var;
use poem_core::envs::{Action, ActionSpace, ObsScale};
use poem_core::nn::ParamVector;
use poem_core::policy::{ActionDistribution, ActorCritic, HeadVars};
use poem_core::ppo::{minibatch_loss, DiversityTerm, PpoConfig};
use poem_core::rollout::{RolloutBatch, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Relative error is `|a - n| / max(|a|, |n|, FLOOR)`.
pub const FLOOR: f64 = 1e-4;
pub const STEP: f64 = 1e-6;
pub const LOSSES: [&str; 4] = ["l_ppo", "l_vf", "entropy", "l_total"];

pub struct Case {
    pub ac: ActorCritic,
    pub batch: RolloutBatch,
    pub reference: Vec<f64>,
}

pub struct Report {
    pub cases: usize,
    /// Worst relative error per loss, in `LOSSES` order.
    pub max_rel_err: [f64; 4],
    pub checked: usize,
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// A ratio in [0.5, 1.5] kept clear of the clip kinks at 0.8 and 1.2.
fn safe_ratio<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let r: f64 = rng.random_range(0.5..1.5);
        if (r - 0.8).abs() > 0.02 && (r - 1.2).abs() > 0.02 {
            return r;
        }
    }
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs_dim = rng.random_range(1..=4);
    let space = if rng.random_bool(0.5) {
        ActionSpace::Continuous {
            dim: rng.random_range(1..=3),
            low: -1.0,
            high: 1.0,
        }
    } else {
        ActionSpace::Discrete(rng.random_range(2..=5))
    };
    let hidden: Vec<usize> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(2..=6)).collect();
    let mut ac = ActorCritic::new(obs_dim, &space, &hidden, ObsScale::identity(obs_dim), seed).unwrap();
    let mut p = ac.params().clone();
    for x in p.as_mut_slice() {
        *x += 0.5 * normal(&mut rng);
    }
    for i in ac.log_std_range() {
        p[i] = rng.random_range(-1.0..0.5);
    }
    ac.set_params(p).unwrap();

    let n = rng.random_range(3..=8);
    let mut batch = RolloutBatch::default();
    let mut reference = Vec::with_capacity(n);
    for _ in 0..n {
        let obs: Vec<f64> = (0..obs_dim).map(|_| normal(&mut rng)).collect();
        let dist = ac.distribution(&obs).unwrap();
        let action = match &dist {
            ActionDistribution::Gaussian { mean, log_std } => Action::Continuous(
                mean.iter()
                    .zip(log_std)
                    .map(|(m, l)| m + l.exp() * normal(&mut rng))
                    .collect(),
            ),
            ActionDistribution::Categorical { log_probs } => Action::Discrete(rng.random_range(0..log_probs.len())),
        };
        let logp = dist.log_prob(&action).unwrap();
        reference.push(logp - rng.random_range(-0.5..0.5));
        batch.transitions.push(Transition {
            obs,
            action,
            log_prob_old: logp - safe_ratio(&mut rng).ln(),
            reward: 0.0,
            value_old: 0.0,
            terminated: false,
            truncated: false,
            final_value: None,
        });
        batch.advantages.push(normal(&mut rng));
        batch.returns.push(normal(&mut rng));
    }
    Case { ac, batch, reference }
}

fn head_loss(ac: &ActorCritic, batch: &RolloutBatch, which: usize, want_grad: bool) -> (f64, Option<ParamVector>) {
    let obs: Vec<&[f64]> = batch.transitions.iter().map(|t| t.obs.as_slice()).collect();
    let n = obs.len() as f64;
    ac.evaluate_loss(&obs, want_grad, |tape, h: &HeadVars| {
        let terms: Vec<Var> = (0..h.values.len())
            .map(|i| {
                if which == 1 {
                    let d = tape.add_const(h.values[i], -batch.returns[i]);
                    tape.square(d)
                } else {
                    ac.entropy_var(tape, &h.actor_out[i], &h.log_std)
                }
            })
            .collect();
        let s = tape.sum(&terms);
        tape.scale(s, 1.0 / n)
    })
    .unwrap()
}

pub fn loss(case: &Case, ac: &ActorCritic, which: usize, want_grad: bool) -> (f64, Option<ParamVector>) {
    let idx: Vec<usize> = (0..case.batch.len()).collect();
    match which {
        0 => {
            let cfg = PpoConfig {
                alpha_vf: 0.0,
                alpha_ent: 0.0,
                ..PpoConfig::default()
            };
            let (b, g) = minibatch_loss(ac, &case.batch, &idx, &cfg, None, want_grad).unwrap();
            (b.l_total, g)
        }
        1 | 2 => head_loss(ac, &case.batch, which, want_grad),
        _ => {
            let cfg = PpoConfig {
                alpha_vf: 0.5,
                alpha_ent: 0.01,
                ..PpoConfig::default()
            };
            let div = DiversityTerm {
                lambda_div: 0.1,
                reference_log_probs: &case.reference,
            };
            let (b, g) = minibatch_loss(ac, &case.batch, &idx, &cfg, Some(div), want_grad).unwrap();
            (b.l_total, g)
        }
    }
}

/// Worst relative error of one loss over every parameter.
pub fn check(case: &Case, which: usize) -> f64 {
    let (_, g) = loss(case, &case.ac, which, true);
    let g = g.unwrap();
    let mut probe = case.ac.clone();
    let mut worst: f64 = 0.0;
    for i in 0..g.len() {
        let x = case.ac.params()[i];
        let h = STEP * x.abs().max(1.0);
        probe.params_mut()[i] = x + h;
        let up = loss(case, &probe, which, false).0;
        probe.params_mut()[i] = x - h;
        let down = loss(case, &probe, which, false).0;
        probe.params_mut()[i] = x;
        let numeric = (up - down) / (2.0 * h);
        let rel = (g[i] - numeric).abs() / g[i].abs().max(numeric.abs()).max(FLOOR);
        worst = worst.max(rel);
    }
    worst
}

pub fn run(n_cases: usize, seed: u64) -> Report {
    let mut max_rel_err = [0.0f64; 4];
    let mut checked = 0;
    for k in 0..n_cases as u64 {
        let case = random_case(seed.wrapping_add(k));
        checked += case.ac.params().len() * 4;
        for (which, slot) in max_rel_err.iter_mut().enumerate() {
            *slot = slot.max(check(&case, which));
        }
    }
    Report {
        cases: n_cases,
        max_rel_err,
        checked,
    }
}
