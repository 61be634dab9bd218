//! Reference computations checked against the library.

use poem_core::envs::{Action, ActionSpace, ObsScale};
use poem_core::poem::kl_divergence_mc;
use poem_core::policy::ActorCritic;
use poem_core::rollout::{gae, RolloutBatch, Transition};
use poem_core::stats::{betainc, welch_t_test};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

pub type Check = Result<String, String>;

#[derive(Deserialize)]
struct WelchCase {
    a: Vec<f64>,
    b: Vec<f64>,
    t: f64,
    p: f64,
    dof: f64,
}

#[derive(Deserialize)]
struct BetaincCase {
    x: f64,
    a: f64,
    b: f64,
    value: f64,
}

const WELCH: &str = include_str!("../fixtures/welch_oracle.json");
const BETAINC: &str = include_str!("../fixtures/betainc_oracle.json");

pub fn welch_fixtures() -> Check {
    let cases: Vec<WelchCase> = serde_json::from_str(WELCH).map_err(|e| e.to_string())?;
    let (mut dt, mut dp) = (0.0f64, 0.0f64);
    for (i, c) in cases.iter().enumerate() {
        let r = welch_t_test(&c.a, &c.b).map_err(|e| format!("case {i}: {e}"))?;
        dt = dt.max((r.t_statistic - c.t).abs());
        dp = dp.max((r.p_value - c.p).abs());
        if (r.dof - c.dof).abs() > 1e-8 * c.dof {
            return Err(format!("case {i}: dof {} vs {}", r.dof, c.dof));
        }
    }
    let msg = format!("{} cases, max |dt| {dt:.1e}, max |dp| {dp:.1e}", cases.len());
    if dt <= 1e-10 && dp <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn betainc_fixtures() -> Check {
    let cases: Vec<BetaincCase> = serde_json::from_str(BETAINC).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for c in &cases {
        let v = betainc(c.x, c.a, c.b);
        worst = worst.max((v - c.value).abs() / c.value.abs().max(1e-300));
        let sym = betainc(1.0 - c.x, c.b, c.a);
        if (v + sym - 1.0).abs() > 1e-12 {
            return Err(format!("symmetry at x={} a={} b={}: {}", c.x, c.a, c.b, v + sym - 1.0));
        }
    }
    let msg = format!("{} cases, max relative error {worst:.1e}", cases.len());
    if worst <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> RolloutBatch {
    let mut batch = RolloutBatch::default();
    let mut len = 0;
    for _ in 0..n {
        let u: f64 = rng.random();
        len += 1;
        let terminated = u < 0.08;
        let truncated = !terminated && (u < 0.14 || len == 10);
        if terminated || truncated {
            len = 0;
        }
        batch.transitions.push(Transition {
            obs: vec![0.0],
            action: Action::Discrete(0),
            log_prob_old: 0.0,
            reward: rng.sample(StandardNormal),
            value_old: rng.sample(StandardNormal),
            terminated,
            truncated,
            final_value: truncated.then(|| rng.sample(StandardNormal)),
        });
    }
    batch.bootstrap_value = rng.sample(StandardNormal);
    batch
}

/// `A_t = Σ_l (γλ)^l δ_{t+l}` summed explicitly up to the end of the episode.
fn double_sum(batch: &RolloutBatch, gamma: f64, lam: f64) -> Vec<f64> {
    let tr = &batch.transitions;
    let n = tr.len();
    let delta = |k: usize| {
        let next = if tr[k].terminated {
            0.0
        } else if let Some(v) = tr[k].final_value {
            v
        } else if k + 1 < n {
            tr[k + 1].value_old
        } else {
            batch.bootstrap_value
        };
        tr[k].reward + gamma * next - tr[k].value_old
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for l in 0..n - t {
                sum += (gamma * lam).powi(l as i32) * delta(t + l);
                if tr[t + l].terminated || tr[t + l].truncated {
                    break;
                }
            }
            sum
        })
        .collect()
}

pub fn gae_double_sum() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;
    let mut count = 0;
    for (gamma, lam) in [(0.99, 0.95), (0.9, 0.0), (1.0, 1.0), (0.5, 0.7)] {
        for _ in 0..25 {
            let n = rng.random_range(1..=60);
            let batch = random_batch(&mut rng, n);
            let (adv, ret) = gae(&batch, gamma, lam).map_err(|e| e.to_string())?;
            for (t, want) in double_sum(&batch, gamma, lam).iter().enumerate() {
                worst = worst.max((adv[t] - want).abs());
                worst = worst.max((ret[t] - want - batch.transitions[t].value_old).abs());
            }
            count += 1;
        }
    }
    let msg = format!("{count} batches, max abs error {worst:.1e}");
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Closed-form `D_KL(N(m1, s1) ‖ N(m2, s2))`.
pub fn gaussian_kl(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    (s2 / s1).ln() + (s1 * s1 + (m1 - m2).powi(2)) / (2.0 * s2 * s2) - 0.5
}

/// A one-dimensional Gaussian policy with the given state-independent mean
/// and standard deviation.
fn constant_policy(mean: f64, std: f64) -> ActorCritic {
    let space = ActionSpace::Continuous {
        dim: 1,
        low: -1.0,
        high: 1.0,
    };
    let mut ac = ActorCritic::new(1, &space, &[4], ObsScale::identity(1), 0).unwrap();
    let mut p = ac.params().clone();
    for i in ac.actor_range() {
        p[i] = 0.0;
    }
    p[ac.actor_range().end - 1] = mean;
    p[ac.log_std_range().start] = std.ln();
    ac.set_params(p).unwrap();
    ac
}

pub fn kl_gaussian_pairs(n: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_z = 0.0f64;
    for pair in 0..10 {
        let (m1, s1) = (rng.random_range(-1.0..1.0), rng.random_range(0.3..1.5));
        let (m2, s2) = (m1 + rng.random_range(-0.5..0.5), s1 * rng.random_range(0.7..1.4));
        let ac = constant_policy(m1, s1);
        let reference = constant_policy(m2, s2).params().clone();
        let transitions = (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                Transition {
                    obs: vec![0.0],
                    action: Action::Continuous(vec![m1 + s1 * z]),
                    log_prob_old: 0.0,
                    reward: 0.0,
                    value_old: 0.0,
                    terminated: false,
                    truncated: false,
                    final_value: None,
                }
            })
            .collect();
        let batch = RolloutBatch {
            transitions,
            ..RolloutBatch::default()
        };
        let est = kl_divergence_mc(&ac, &reference, &batch).map_err(|e| e.to_string())?;
        let terms: Vec<f64> = batch
            .transitions
            .iter()
            .map(|t| {
                let Action::Continuous(a) = &t.action else {
                    unreachable!()
                };
                let x = a[0];
                (s2 / s1).ln() - 0.5 * ((x - m1) / s1).powi(2) + 0.5 * ((x - m2) / s2).powi(2)
            })
            .collect();
        let mean = terms.iter().sum::<f64>() / n as f64;
        let var = terms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        let exact = gaussian_kl(m1, s1, m2, s2);
        let z = (est - exact).abs() / se;
        if z > 3.0 {
            return Err(format!("pair {pair}: estimate {est}, exact {exact}, {z:.2} SE"));
        }
        worst_z = worst_z.max(z);
    }
    Ok(format!("10 pairs at N={n}, worst deviation {worst_z:.2} SE"))
}
