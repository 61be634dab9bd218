//! Actor-critic over two independent MLPs.
//!
//! The flat parameter vector is `actor ∥ log_std ∥ critic`. The actor and
//! its state-independent `log_std` form a prefix, the *policy slice*, which
//! is everything the action distribution depends on.

use std::f64::consts::{E, PI};
use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{Tape, Var};
use crate::envs::{Action, ActionSpace, ObsScale};
use crate::error::{Error, Result};
use crate::nn::{self, MlpSpec, ParamVector};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Initial scale of the actor's output-layer weights.
pub const ACTOR_HEAD_SCALE: f64 = 0.01;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyHead {
    DiagGaussian { action_dim: usize },
    Categorical { n_actions: usize },
}

impl PolicyHead {
    pub fn for_space(space: &ActionSpace) -> Self {
        match *space {
            ActionSpace::Continuous { dim, .. } => PolicyHead::DiagGaussian { action_dim: dim },
            ActionSpace::Discrete(n) => PolicyHead::Categorical { n_actions: n },
        }
    }

    pub fn output_dim(&self) -> usize {
        match *self {
            PolicyHead::DiagGaussian { action_dim } => action_dim,
            PolicyHead::Categorical { n_actions } => n_actions,
        }
    }

    fn log_std_len(&self) -> usize {
        match *self {
            PolicyHead::DiagGaussian { action_dim } => action_dim,
            PolicyHead::Categorical { .. } => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionDistribution {
    Gaussian { mean: Vec<f64>, log_std: Vec<f64> },
    Categorical { log_probs: Vec<f64> },
}

impl ActionDistribution {
    pub fn gaussian(mean: Vec<f64>, log_std: Vec<f64>) -> Self {
        let log_std = log_std.into_iter().map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
        ActionDistribution::Gaussian { mean, log_std }
    }

    pub fn categorical_from_logits(logits: &[f64]) -> Self {
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        ActionDistribution::Categorical {
            log_probs: logits.iter().map(|l| l - lse).collect(),
        }
    }

    pub fn probs(&self) -> Option<Vec<f64>> {
        match self {
            ActionDistribution::Categorical { log_probs } => Some(log_probs.iter().map(|l| l.exp()).collect()),
            ActionDistribution::Gaussian { .. } => None,
        }
    }

    pub fn std(&self) -> Option<Vec<f64>> {
        match self {
            ActionDistribution::Gaussian { log_std, .. } => Some(log_std.iter().map(|l| l.exp()).collect()),
            ActionDistribution::Categorical { .. } => None,
        }
    }

    /// Gaussian mean or categorical argmax (lowest index on ties).
    pub fn mode(&self) -> Action {
        match self {
            ActionDistribution::Gaussian { mean, .. } => Action::Continuous(mean.clone()),
            ActionDistribution::Categorical { log_probs } => {
                let mut best = 0;
                for (i, &l) in log_probs.iter().enumerate() {
                    if l > log_probs[best] {
                        best = i;
                    }
                }
                Action::Discrete(best)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, deterministic: bool) -> Action {
        if deterministic {
            return self.mode();
        }
        match self {
            ActionDistribution::Gaussian { mean, log_std } => Action::Continuous(
                mean.iter()
                    .zip(log_std)
                    .map(|(m, l)| {
                        let z: f64 = rng.sample(StandardNormal);
                        m + l.exp() * z
                    })
                    .collect(),
            ),
            ActionDistribution::Categorical { log_probs } => {
                let u: f64 = rng.random();
                let mut cumulative = 0.0;
                for (i, l) in log_probs.iter().enumerate() {
                    cumulative += l.exp();
                    if u < cumulative {
                        return Action::Discrete(i);
                    }
                }
                Action::Discrete(log_probs.len() - 1)
            }
        }
    }

    pub fn log_prob(&self, action: &Action) -> Result<f64> {
        match (self, action) {
            (ActionDistribution::Gaussian { mean, log_std }, Action::Continuous(a)) => {
                if a.len() != mean.len() {
                    return Err(Error::dims("gaussian action", mean.len(), a.len()));
                }
                Ok(mean
                    .iter()
                    .zip(log_std)
                    .zip(a)
                    .map(|((m, l), x)| {
                        let z = (x - m) * (-l).exp();
                        -HALF_LN_2PI - l - 0.5 * z * z
                    })
                    .sum())
            }
            (ActionDistribution::Categorical { log_probs }, Action::Discrete(i)) => {
                log_probs.get(*i).copied().ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "action index {i} out of range for {} categories",
                        log_probs.len()
                    ))
                })
            }
            _ => Err(Error::InvalidArgument(
                "action kind does not match the distribution".into(),
            )),
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            ActionDistribution::Gaussian { log_std, .. } => log_std.iter().map(|l| 0.5 * (2.0 * PI * E).ln() + l).sum(),
            ActionDistribution::Categorical { log_probs } => -log_probs
                .iter()
                .map(|&l| {
                    let p = l.exp();
                    if p == 0.0 {
                        0.0
                    } else {
                        p * l
                    }
                })
                .sum::<f64>(),
        }
    }
}

/// Tape variables for a batch of observations.
#[derive(Debug, Clone)]
pub struct HeadVars {
    /// Actor outputs per sample: Gaussian means or categorical logits.
    pub actor_out: Vec<Vec<Var>>,
    /// Clamped log standard deviations (empty for categorical heads).
    pub log_std: Vec<Var>,
    pub values: Vec<Var>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    actor: MlpSpec,
    critic: MlpSpec,
    head: PolicyHead,
    obs_scale: ObsScale,
    params: ParamVector,
}

impl ActorCritic {
    /// Fresh network pair. The actor and critic draw from seeds derived from `seed`.
    pub fn new(obs_dim: usize, space: &ActionSpace, hidden: &[usize], obs_scale: ObsScale, seed: u64) -> Result<Self> {
        if obs_scale.dim() != obs_dim {
            return Err(Error::dims("observation scale", obs_dim, obs_scale.dim()));
        }
        let head = PolicyHead::for_space(space);
        let sizes = |out: usize| {
            let mut s = Vec::with_capacity(hidden.len() + 2);
            s.push(obs_dim);
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let actor = MlpSpec::new(sizes(head.output_dim()))?;
        let critic = MlpSpec::new(sizes(1))?;
        let actor_params = nn::init_params_with_head_scale(&actor, seed, ACTOR_HEAD_SCALE);
        let critic_params = nn::init_params(&critic, seed ^ 0x5851_f42d_4c95_7f2d);
        let mut values = actor_params.into_inner();
        values.extend(std::iter::repeat_n(0.0, head.log_std_len()));
        values.extend(critic_params.into_inner());
        Self::from_parts(actor, critic, head, obs_scale, ParamVector::from(values))
    }

    pub fn from_parts(
        actor: MlpSpec,
        critic: MlpSpec,
        head: PolicyHead,
        obs_scale: ObsScale,
        params: ParamVector,
    ) -> Result<Self> {
        if actor.output_dim() != head.output_dim() {
            return Err(Error::dims("actor output", head.output_dim(), actor.output_dim()));
        }
        if critic.output_dim() != 1 {
            return Err(Error::dims("critic output", 1, critic.output_dim()));
        }
        if actor.input_dim() != critic.input_dim() {
            return Err(Error::dims("critic input", actor.input_dim(), critic.input_dim()));
        }
        if obs_scale.dim() != actor.input_dim() {
            return Err(Error::dims("observation scale", actor.input_dim(), obs_scale.dim()));
        }
        let expected = actor.n_params() + head.log_std_len() + critic.n_params();
        if params.len() != expected {
            return Err(Error::dims("actor-critic parameters", expected, params.len()));
        }
        Ok(Self {
            actor,
            critic,
            head,
            obs_scale,
            params,
        })
    }

    pub fn actor_spec(&self) -> &MlpSpec {
        &self.actor
    }

    pub fn critic_spec(&self) -> &MlpSpec {
        &self.critic
    }

    pub fn head(&self) -> PolicyHead {
        self.head
    }

    pub fn obs_scale(&self) -> &ObsScale {
        &self.obs_scale
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    pub fn set_params(&mut self, params: ParamVector) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::dims("actor-critic parameters", self.params.len(), params.len()));
        }
        self.params = params;
        Ok(())
    }

    pub fn actor_range(&self) -> Range<usize> {
        0..self.actor.n_params()
    }

    pub fn log_std_range(&self) -> Range<usize> {
        let start = self.actor.n_params();
        start..start + self.head.log_std_len()
    }

    pub fn critic_range(&self) -> Range<usize> {
        let start = self.log_std_range().end;
        start..start + self.critic.n_params()
    }

    /// Actor weights plus `log_std`: the prefix the action distribution reads.
    pub fn policy_range(&self) -> Range<usize> {
        0..self.log_std_range().end
    }

    pub fn log_std(&self) -> &[f64] {
        &self.params.as_slice()[self.log_std_range()]
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.obs_dim() {
            return Err(Error::dims("observation", self.obs_dim(), obs.len()));
        }
        Ok(())
    }

    /// Resolves a full-length or policy-prefix-length vector to a policy slice.
    pub fn policy_slice<'a>(&self, params: &'a ParamVector) -> Result<&'a [f64]> {
        let policy_len = self.policy_range().end;
        if params.len() == self.params.len() || params.len() == policy_len {
            Ok(&params.as_slice()[..policy_len])
        } else {
            Err(Error::dims("policy parameters", policy_len, params.len()))
        }
    }

    pub fn distribution(&self, obs: &[f64]) -> Result<ActionDistribution> {
        self.distribution_from(&self.params.as_slice()[self.policy_range()], obs)
    }

    /// Distribution under different policy parameters (full vector or policy prefix).
    pub fn distribution_under(&self, params: &ParamVector, obs: &[f64]) -> Result<ActionDistribution> {
        self.distribution_from(self.policy_slice(params)?, obs)
    }

    fn distribution_from(&self, policy: &[f64], obs: &[f64]) -> Result<ActionDistribution> {
        self.check_obs(obs)?;
        let actor_len = self.actor.n_params();
        let out = nn::forward(&self.actor, &policy[..actor_len], &self.obs_scale.apply(obs))?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("actor produced a non-finite output".into()));
        }
        Ok(match self.head {
            PolicyHead::DiagGaussian { .. } => ActionDistribution::gaussian(out, policy[actor_len..].to_vec()),
            PolicyHead::Categorical { .. } => ActionDistribution::categorical_from_logits(&out),
        })
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        self.check_obs(obs)?;
        let out = nn::forward(
            &self.critic,
            &self.params.as_slice()[self.critic_range()],
            &self.obs_scale.apply(obs),
        )?;
        Ok(out[0])
    }

    /// Evaluates a tape-built loss over a batch of observations.
    ///
    /// With `want_grad` the result carries `d(loss)/d(params)` over the full
    /// parameter vector (actor, log_std and critic).
    pub fn evaluate_loss<F>(
        &self,
        observations: &[&[f64]],
        want_grad: bool,
        loss: F,
    ) -> Result<(f64, Option<ParamVector>)>
    where
        F: FnOnce(&mut Tape, &HeadVars) -> Var,
    {
        let params = self.params.as_slice();
        let actor_p = &params[self.actor_range()];
        let critic_p = &params[self.critic_range()];
        let mut actor_traces = Vec::with_capacity(observations.len());
        let mut critic_traces = Vec::with_capacity(observations.len());
        for obs in observations {
            self.check_obs(obs)?;
            let x = self.obs_scale.apply(obs);
            actor_traces.push(nn::forward_trace(&self.actor, actor_p, &x)?);
            critic_traces.push(nn::forward_trace(&self.critic, critic_p, &x)?);
        }

        let n = observations.len();
        let mut tape = Tape::with_capacity(n * 32);
        let raw_log_std: Vec<Var> = self.log_std().iter().map(|&l| tape.var(l)).collect();
        let log_std = raw_log_std
            .iter()
            .map(|&l| tape.clamp(l, LOG_STD_MIN, LOG_STD_MAX))
            .collect();
        let actor_out: Vec<Vec<Var>> = actor_traces
            .iter()
            .map(|t| t.output().iter().map(|&o| tape.var(o)).collect())
            .collect();
        let values: Vec<Var> = critic_traces.iter().map(|t| tape.var(t.output()[0])).collect();
        let vars = HeadVars {
            actor_out,
            log_std,
            values,
        };
        let root = loss(&mut tape, &vars);
        let value = tape.value(root);
        if !value.is_finite() {
            return Err(Error::Numerical(format!("loss evaluated to {value}")));
        }
        if !want_grad {
            return Ok((value, None));
        }

        let adjoint = tape.backward(root);
        let mut grad = ParamVector::zeros(self.params.len());
        let g = grad.as_mut_slice();
        let (ar, lr, cr) = (self.actor_range(), self.log_std_range(), self.critic_range());
        for (i, t) in actor_traces.iter().enumerate() {
            let d_out: Vec<f64> = vars.actor_out[i].iter().map(|v| adjoint[v.index()]).collect();
            if d_out.iter().any(|&d| d != 0.0) {
                nn::backward(&self.actor, actor_p, t, &d_out, &mut g[ar.clone()])?;
            }
        }
        for (slot, v) in g[lr].iter_mut().zip(&raw_log_std) {
            *slot += adjoint[v.index()];
        }
        for (i, t) in critic_traces.iter().enumerate() {
            let d = adjoint[vars.values[i].index()];
            if d != 0.0 {
                nn::backward(&self.critic, critic_p, t, &[d], &mut g[cr.clone()])?;
            }
        }
        if !grad.is_finite() {
            return Err(Error::Numerical("non-finite gradient entry".into()));
        }
        Ok((value, Some(grad)))
    }

    /// `log π(action)` on the tape for one sample's actor outputs.
    pub fn log_prob_var(&self, tape: &mut Tape, actor_out: &[Var], log_std: &[Var], action: &Action) -> Result<Var> {
        match (self.head, action) {
            (PolicyHead::DiagGaussian { action_dim }, Action::Continuous(a)) => {
                if a.len() != action_dim {
                    return Err(Error::dims("gaussian action", action_dim, a.len()));
                }
                let mut terms = Vec::with_capacity(action_dim);
                for d in 0..action_dim {
                    let neg_mu = tape.neg(actor_out[d]);
                    let diff = tape.add_const(neg_mu, a[d]);
                    let neg_ls = tape.neg(log_std[d]);
                    let inv_std = tape.exp(neg_ls);
                    let z = tape.mul(diff, inv_std);
                    let z2 = tape.square(z);
                    let half_z2 = tape.scale(z2, -0.5);
                    let t = tape.sub(half_z2, log_std[d]);
                    terms.push(tape.add_const(t, -HALF_LN_2PI));
                }
                Ok(tape.sum(&terms))
            }
            (PolicyHead::Categorical { n_actions }, Action::Discrete(i)) => {
                if *i >= n_actions {
                    return Err(Error::InvalidArgument(format!(
                        "action index {i} out of range for {n_actions} categories"
                    )));
                }
                let lse = log_sum_exp(tape, actor_out);
                Ok(tape.sub(actor_out[*i], lse))
            }
            _ => Err(Error::InvalidArgument(
                "action kind does not match the policy head".into(),
            )),
        }
    }

    /// Entropy on the tape for one sample's actor outputs.
    pub fn entropy_var(&self, tape: &mut Tape, actor_out: &[Var], log_std: &[Var]) -> Var {
        match self.head {
            PolicyHead::DiagGaussian { .. } => {
                let c = 0.5 * (2.0 * PI * E).ln();
                let s = tape.sum(log_std);
                tape.add_const(s, c * log_std.len() as f64)
            }
            PolicyHead::Categorical { .. } => {
                let lse = log_sum_exp(tape, actor_out);
                let mut terms = Vec::with_capacity(actor_out.len());
                for &l in actor_out {
                    let logp = tape.sub(l, lse);
                    let p = tape.exp(logp);
                    terms.push(tape.mul(p, logp));
                }
                let s = tape.sum(&terms);
                tape.neg(s)
            }
        }
    }
}

/// Log-sum-exp with the maximum subtracted as a constant shift.
fn log_sum_exp(tape: &mut Tape, xs: &[Var]) -> Var {
    let m = xs.iter().map(|&x| tape.value(x)).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<Var> = xs
        .iter()
        .map(|&x| {
            let shifted = tape.add_const(x, -m);
            tape.exp(shifted)
        })
        .collect();
    let s = tape.sum(&exps);
    let l = tape.ln(s);
    tape.add_const(l, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_ac() -> ActorCritic {
        ActorCritic::new(
            2,
            &ActionSpace::Continuous {
                dim: 1,
                low: -1.0,
                high: 1.0,
            },
            &[8],
            ObsScale::identity(2),
            3,
        )
        .unwrap()
    }

    fn categorical_ac() -> ActorCritic {
        ActorCritic::new(3, &ActionSpace::Discrete(4), &[8, 8], ObsScale::identity(3), 5).unwrap()
    }

    fn zeroed(mut ac: ActorCritic) -> ActorCritic {
        ac.params_mut().as_mut_slice().fill(0.0);
        ac
    }

    #[test]
    fn zero_actor_gives_standard_normal() {
        let ac = zeroed(gaussian_ac());
        let d = ac.distribution(&[0.3, -0.2]).unwrap();
        assert_eq!(
            d,
            ActionDistribution::Gaussian {
                mean: vec![0.0],
                log_std: vec![0.0]
            }
        );
        assert_eq!(d.std().unwrap(), vec![1.0]);
        assert_eq!(ac.value(&[0.3, -0.2]).unwrap(), 0.0);
    }

    #[test]
    fn zero_logits_are_uniform() {
        let ac = zeroed(categorical_ac());
        let d = ac.distribution(&[1.0, 2.0, 3.0]).unwrap();
        for p in d.probs().unwrap() {
            assert!((p - 0.25).abs() < 1e-15);
        }
        assert!((d.log_prob(&Action::Discrete(2)).unwrap() - 0.25f64.ln()).abs() < 1e-12);
        assert!((d.entropy() - 4f64.ln()).abs() < 1e-12);
        assert!(d.log_prob(&Action::Discrete(4)).is_err());
    }

    #[test]
    fn closed_form_gaussian_values() {
        let d = ActionDistribution::gaussian(vec![0.0], vec![0.0]);
        assert!((d.log_prob(&Action::Continuous(vec![0.0])).unwrap() + 0.918_938_5).abs() < 1e-7);
        assert!((d.log_prob(&Action::Continuous(vec![1.0])).unwrap() + 1.418_938_5).abs() < 1e-7);
        assert!((d.entropy() - 1.418_938_5).abs() < 1e-7);
    }

    #[test]
    fn one_hot_entropy_is_zero() {
        let d = ActionDistribution::categorical_from_logits(&[0.0, -1e6, -1e6]);
        assert_eq!(d.entropy(), 0.0);
    }

    #[test]
    fn log_std_is_floored() {
        let d = ActionDistribution::gaussian(vec![0.7], vec![-1e9]);
        assert_eq!(
            d,
            ActionDistribution::Gaussian {
                mean: vec![0.7],
                log_std: vec![LOG_STD_MIN]
            }
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match d.sample(&mut rng, false) {
            Action::Continuous(a) => assert!((a[0] - 0.7).abs() < 1e-7),
            _ => unreachable!(),
        }
        assert!(d.log_prob(&Action::Continuous(vec![0.7])).unwrap().is_finite());
    }

    #[test]
    fn deterministic_sampling_returns_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = ActionDistribution::gaussian(vec![0.25, -1.0], vec![0.0, 0.0]);
        assert_eq!(g.sample(&mut rng, true), Action::Continuous(vec![0.25, -1.0]));
        let c = ActionDistribution::categorical_from_logits(&[0.1, 2.0, 2.0, -1.0]);
        assert_eq!(c.sample(&mut rng, true), Action::Discrete(1));
    }

    #[test]
    fn replayed_rng_gives_same_action() {
        let ac = categorical_ac();
        let d = ac.distribution(&[0.5, 0.1, -0.3]).unwrap();
        let a = d.sample(&mut ChaCha8Rng::seed_from_u64(42), false);
        let b = d.sample(&mut ChaCha8Rng::seed_from_u64(42), false);
        assert_eq!(a, b);
    }

    #[test]
    fn affine_critic() {
        let actor = MlpSpec::new(vec![1, 1]).unwrap();
        let critic = MlpSpec::new(vec![1, 1]).unwrap();
        let ac = ActorCritic::from_parts(
            actor,
            critic,
            PolicyHead::DiagGaussian { action_dim: 1 },
            ObsScale::identity(1),
            ParamVector::from(vec![0.0, 0.0, 0.0, 2.0, 1.0]),
        )
        .unwrap();
        assert_eq!(ac.value(&[3.0]).unwrap(), 7.0);
        assert_eq!(ac.value(&[3.0]).unwrap(), ac.value(&[3.0]).unwrap());
    }

    #[test]
    fn layout_ranges_partition_params() {
        let ac = gaussian_ac();
        let (a, l, c) = (ac.actor_range(), ac.log_std_range(), ac.critic_range());
        assert_eq!(a.end, l.start);
        assert_eq!(l.end, c.start);
        assert_eq!(c.end, ac.params().len());
        assert_eq!(l.len(), 1);
        assert_eq!(categorical_ac().log_std_range().len(), 0);
    }

    #[test]
    fn categorical_probabilities_normalize() {
        let ac = categorical_ac();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let obs: Vec<f64> = (0..3).map(|_| rng.random_range(-50.0..50.0)).collect();
            let d = ac.distribution(&obs).unwrap();
            let total: f64 = (0..4).map(|i| d.log_prob(&Action::Discrete(i)).unwrap().exp()).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_density_integrates_to_one() {
        let d = ActionDistribution::gaussian(vec![0.4], vec![-0.3]);
        let sigma = (-0.3f64).exp();
        let (lo, hi) = (0.4 - 8.0 * sigma, 0.4 + 8.0 * sigma);
        // Composite Simpson over +-8 sigma.
        let n = 4000;
        let h = (hi - lo) / n as f64;
        let f = |x: f64| d.log_prob(&Action::Continuous(vec![x])).unwrap().exp();
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(lo + i as f64 * h);
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gaussian_entropy_matches_monte_carlo() {
        let d = ActionDistribution::gaussian(vec![0.1, -0.5], vec![0.2, -0.7]);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| -d.log_prob(&d.sample(&mut rng, false)).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - d.entropy()).abs() < 3.0 * se, "{mean} vs {}", d.entropy());
    }

    #[test]
    fn tape_log_prob_and_entropy_match_closed_forms() {
        for ac in [gaussian_ac(), categorical_ac()] {
            let obs = vec![0.3; ac.obs_dim()];
            let d = ac.distribution(&obs).unwrap();
            let action = d.sample(&mut ChaCha8Rng::seed_from_u64(3), false);
            let (lp, _) = ac
                .evaluate_loss(&[&obs], false, |t, h| {
                    ac.log_prob_var(t, &h.actor_out[0], &h.log_std, &action).unwrap()
                })
                .unwrap();
            let (ent, _) = ac
                .evaluate_loss(&[&obs], false, |t, h| ac.entropy_var(t, &h.actor_out[0], &h.log_std))
                .unwrap();
            assert!((lp - d.log_prob(&action).unwrap()).abs() < 1e-12);
            assert!((ent - d.entropy()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_observation_width() {
        let ac = gaussian_ac();
        assert!(ac.distribution(&[0.0]).is_err());
        assert!(ac.value(&[0.0, 1.0, 2.0]).is_err());
    }
}
