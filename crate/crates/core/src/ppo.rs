//! Clipped-surrogate PPO losses and the epoch/minibatch update loop.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{AdamState, ParamVector};
use crate::poem::DiversityMetrics;
use crate::policy::ActorCritic;
use crate::rollout::RolloutBatch;

/// Added to the gradient norm before rescaling, matching the usual
/// `clip_grad_norm_` convention.
const CLIP_NORM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    pub alpha_vf: f64,
    pub alpha_ent: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub max_grad_norm: Option<f64>,
    pub gamma: f64,
    pub lam: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            alpha_vf: 0.5,
            alpha_ent: 0.0,
            epochs: 10,
            minibatch_size: 64,
            learning_rate: 3e-4,
            max_grad_norm: Some(0.5),
            gamma: 0.99,
            lam: 0.95,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self, rollout_size: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad(format!("clip_epsilon {} outside (0, 1)", self.clip_epsilon));
        }
        if !(self.alpha_vf >= 0.0 && self.alpha_ent >= 0.0) {
            return bad("alpha_vf and alpha_ent must be nonnegative".into());
        }
        if self.minibatch_size == 0 || self.minibatch_size > rollout_size {
            return bad(format!(
                "minibatch_size {} must be in 1..={rollout_size}",
                self.minibatch_size
            ));
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if let Some(g) = self.max_grad_norm {
            if !(g > 0.0) {
                return bad(format!("max_grad_norm {g} must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lam) {
            return bad("gamma and lam must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Loss terms for one minibatch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub l_ppo: f64,
    pub l_vf: f64,
    pub entropy: f64,
    pub kl_div: f64,
    pub l_total: f64,
}

impl LossBreakdown {
    /// `l_ppo - lambda_div * kl_div + alpha_vf * l_vf - alpha_ent * entropy`.
    pub fn assemble(
        l_ppo: f64,
        kl_div: f64,
        l_vf: f64,
        entropy: f64,
        lambda_div: f64,
        alpha_vf: f64,
        alpha_ent: f64,
    ) -> Self {
        Self {
            l_ppo,
            l_vf,
            entropy,
            kl_div,
            l_total: l_ppo - lambda_div * kl_div + alpha_vf * l_vf - alpha_ent * entropy,
        }
    }
}

/// Diversity bonus against a reference policy with precomputed log-probs.
#[derive(Debug, Clone, Copy)]
pub struct DiversityTerm<'a> {
    pub lambda_div: f64,
    /// `log π_ref(a_i | s_i)` for each minibatch sample, in minibatch order.
    pub reference_log_probs: &'a [f64],
}

pub fn clipped_surrogate(logp_new: &[f64], logp_old: &[f64], advantages: &[f64], clip_epsilon: f64) -> Result<f64> {
    let n = logp_new.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "clipped surrogate needs at least one sample".into(),
        ));
    }
    if logp_old.len() != n {
        return Err(Error::dims("old log-probs", n, logp_old.len()));
    }
    if advantages.len() != n {
        return Err(Error::dims("advantages", n, advantages.len()));
    }
    let total: f64 = (0..n)
        .map(|i| {
            let ratio = (logp_new[i] - logp_old[i]).exp();
            let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
            (ratio * advantages[i]).min(clipped * advantages[i])
        })
        .sum();
    Ok(-total / n as f64)
}

pub fn value_loss(values: &[f64], returns: &[f64]) -> Result<f64> {
    if values.len() != returns.len() {
        return Err(Error::dims("returns", values.len(), returns.len()));
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("value loss needs at least one sample".into()));
    }
    Ok(values.iter().zip(returns).map(|(v, r)| (v - r) * (v - r)).sum::<f64>() / values.len() as f64)
}

/// Tape nodes of one minibatch's composite loss.
struct LossNodes {
    l_ppo: Var,
    l_vf: Var,
    entropy: Var,
    kl_div: Var,
    l_total: Var,
}

fn build_loss(
    ac: &ActorCritic,
    tape: &mut Tape,
    heads: &crate::policy::HeadVars,
    batch: &RolloutBatch,
    indices: &[usize],
    config: &PpoConfig,
    diversity: Option<DiversityTerm<'_>>,
) -> Result<LossNodes> {
    let n = indices.len();
    let mut surrogate = Vec::with_capacity(n);
    let mut squared = Vec::with_capacity(n);
    let mut logps = Vec::with_capacity(n);
    for (k, &i) in indices.iter().enumerate() {
        let tr = &batch.transitions[i];
        let adv = batch.advantages[i];
        let logp = ac.log_prob_var(tape, &heads.actor_out[k], &heads.log_std, &tr.action)?;
        logps.push(logp);
        let log_ratio = tape.add_const(logp, -tr.log_prob_old);
        let ratio = tape.exp(log_ratio);
        let unclipped = tape.scale(ratio, adv);
        let clipped_ratio = tape.clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
        let clipped = tape.scale(clipped_ratio, adv);
        surrogate.push(tape.min(unclipped, clipped));

        let err = tape.add_const(heads.values[k], -batch.returns[i]);
        squared.push(tape.square(err));
    }
    let mean_surrogate = tape.mean(&surrogate);
    let l_ppo = tape.neg(mean_surrogate);
    let l_vf = tape.mean(&squared);
    let entropy = match ac.head() {
        crate::policy::PolicyHead::DiagGaussian { .. } => ac.entropy_var(tape, &[], &heads.log_std),
        crate::policy::PolicyHead::Categorical { .. } => {
            let per_sample: Vec<Var> = heads
                .actor_out
                .iter()
                .map(|out| ac.entropy_var(tape, out, &heads.log_std))
                .collect();
            tape.mean(&per_sample)
        }
    };

    let (l_total_core, kl_div) = match diversity {
        Some(div) => {
            if div.reference_log_probs.len() != n {
                return Err(Error::dims("reference log-probs", n, div.reference_log_probs.len()));
            }
            let log_ratios: Vec<Var> = logps
                .iter()
                .zip(div.reference_log_probs)
                .map(|(&lp, &r)| tape.add_const(lp, -r))
                .collect();
            let kl = tape.mean(&log_ratios);
            let weighted = tape.scale(kl, div.lambda_div);
            (tape.sub(l_ppo, weighted), kl)
        }
        None => (l_ppo, tape.constant(0.0)),
    };
    let vf_term = tape.scale(l_vf, config.alpha_vf);
    let with_vf = tape.add(l_total_core, vf_term);
    let ent_term = tape.scale(entropy, config.alpha_ent);
    let l_total = tape.sub(with_vf, ent_term);
    Ok(LossNodes {
        l_ppo,
        l_vf,
        entropy,
        kl_div,
        l_total,
    })
}

/// Composite loss on a minibatch, optionally with its gradient.
///
/// `diversity = None` is plain PPO (`lambda_div = 0`, reported `kl_div = 0`).
pub fn minibatch_loss(
    ac: &ActorCritic,
    batch: &RolloutBatch,
    indices: &[usize],
    config: &PpoConfig,
    diversity: Option<DiversityTerm<'_>>,
    want_grad: bool,
) -> Result<(LossBreakdown, Option<ParamVector>)> {
    if !batch.has_advantages() {
        return Err(Error::InvalidArgument(
            "batch has no advantages; run compute_gae first".into(),
        ));
    }
    if indices.is_empty() {
        return Err(Error::InvalidArgument("empty minibatch".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= batch.len()) {
        return Err(Error::InvalidArgument(format!("minibatch index {bad} out of range")));
    }
    let observations: Vec<&[f64]> = indices.iter().map(|&i| batch.transitions[i].obs.as_slice()).collect();
    let mut breakdown = None;
    let mut build_err = None;
    let result = ac.evaluate_loss(&observations, want_grad, |tape, heads| {
        match build_loss(ac, tape, heads, batch, indices, config, diversity) {
            Ok(n) => {
                breakdown = Some(LossBreakdown {
                    l_ppo: tape.value(n.l_ppo),
                    l_vf: tape.value(n.l_vf),
                    entropy: tape.value(n.entropy),
                    kl_div: tape.value(n.kl_div),
                    l_total: tape.value(n.l_total),
                });
                n.l_total
            }
            Err(e) => {
                build_err = Some(e);
                tape.constant(f64::NAN)
            }
        }
    });
    if let Some(e) = build_err {
        return Err(e);
    }
    let (_, grad) = result?;
    Ok((breakdown.expect("loss built without error"), grad))
}

/// Global-norm rescaling; returns the pre-clipping norm.
pub fn clip_grad_norm(grad: &mut ParamVector, max_norm: Option<f64>) -> f64 {
    let norm = grad.l2_norm();
    if let Some(max) = max_norm {
        let coef = max / (norm + CLIP_NORM_EPS);
        if coef < 1.0 {
            for g in grad.as_mut_slice() {
                *g *= coef;
            }
        }
    }
    norm
}

/// Shuffled minibatch partition of `0..n`; the final chunk may be short.
pub fn minibatch_indices<R: Rng + ?Sized>(n: usize, size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(size.max(1)).map(<[usize]>::to_vec).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinibatchRecord {
    pub epoch: usize,
    pub minibatch: usize,
    pub losses: LossBreakdown,
    pub grad_norm: f64,
    pub diversity: Option<DiversityMetrics>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateDiagnostics {
    pub minibatches: Vec<MinibatchRecord>,
}

/// Gradient step on one minibatch: loss, clipping, Adam.
pub(crate) fn gradient_step(
    ac: &mut ActorCritic,
    batch: &RolloutBatch,
    indices: &[usize],
    config: &PpoConfig,
    diversity: Option<DiversityTerm<'_>>,
    adam: &mut AdamState,
) -> Result<(LossBreakdown, f64)> {
    let (losses, grad) = minibatch_loss(ac, batch, indices, config, diversity, true)?;
    let mut grad = grad.expect("gradient requested");
    let norm = clip_grad_norm(&mut grad, config.max_grad_norm);
    adam.step(ac.params_mut(), &grad)?;
    if !ac.params().is_finite() {
        return Err(Error::Numerical(
            "parameters became non-finite after the Adam step".into(),
        ));
    }
    Ok((losses, norm))
}

pub(crate) fn at_minibatch(epoch: usize, k: usize, e: Error) -> Error {
    match e {
        Error::Numerical(m) => Error::Numerical(format!("epoch {epoch}, minibatch {k}: {m}")),
        other => other,
    }
}

/// Standard PPO update over `config.epochs` shuffled passes of the batch.
pub fn ppo_update<R: Rng + ?Sized>(
    ac: &mut ActorCritic,
    batch: &RolloutBatch,
    config: &PpoConfig,
    adam: &mut AdamState,
    shuffle_rng: &mut R,
) -> Result<UpdateDiagnostics> {
    let mut diagnostics = UpdateDiagnostics::default();
    for epoch in 0..config.epochs {
        for (k, indices) in minibatch_indices(batch.len(), config.minibatch_size, shuffle_rng)
            .into_iter()
            .enumerate()
        {
            let (losses, grad_norm) =
                gradient_step(ac, batch, &indices, config, None, adam).map_err(|e| at_minibatch(epoch, k, e))?;
            diagnostics.minibatches.push(MinibatchRecord {
                epoch,
                minibatch: k,
                losses,
                grad_norm,
                diversity: None,
            });
        }
    }
    Ok(diagnostics)
}
