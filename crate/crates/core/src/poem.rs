//! KL-triggered evolutionary mutation on top of PPO.
//!
//! Per minibatch: a gradient step on
//! `L_total = L_PPO - λ_div·D_KL(π_θ ‖ π_θ̂) + α_vf·L_VF - α_ent·H(π_θ)`,
//! then the EMA reference `θ̂ ← β·θ̂ + (1-β)·θ` is advanced, the post-step
//! divergence `d_post` is measured on the same minibatch, and when
//! `d_post < δ` Gaussian candidates `θ' = θ + N(0, σ²I)` are drawn with σ
//! interpolated between `σ_max` (full stagnation) and `σ_min` (at the
//! threshold). A candidate replaces θ only if its `L_total` is strictly lower.

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::nn::{AdamState, ParamVector};
use crate::policy::ActorCritic;
use crate::ppo::{
    at_minibatch, gradient_step, minibatch_indices, minibatch_loss, DiversityTerm, LossBreakdown, MinibatchRecord,
    PpoConfig, UpdateDiagnostics,
};
use crate::rollout::RolloutBatch;

/// A threshold no estimate can fall below; disables mutation.
pub const TRIGGER_DISABLED: f64 = -1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutateScope {
    /// Actor weights and `log_std`.
    ActorOnly,
    ActorAndCritic,
}

impl MutateScope {
    pub fn as_str(&self) -> &'static str {
        match self {
            MutateScope::ActorOnly => "actor_only",
            MutateScope::ActorAndCritic => "actor_and_critic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "actor_only" => Ok(MutateScope::ActorOnly),
            "actor_and_critic" => Ok(MutateScope::ActorAndCritic),
            other => Err(Error::Config(format!(
                "unknown mutate_scope {other:?} (expected actor_only or actor_and_critic)"
            ))),
        }
    }

    pub fn range(&self, ac: &ActorCritic) -> Range<usize> {
        match self {
            MutateScope::ActorOnly => ac.policy_range(),
            MutateScope::ActorAndCritic => 0..ac.params().len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoemConfig {
    pub beta: f64,
    pub delta: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub lambda_div: f64,
    pub n_candidates: usize,
    pub mutate_scope: MutateScope,
}

impl Default for PoemConfig {
    fn default() -> Self {
        Self {
            beta: 0.99,
            delta: 0.01,
            sigma_min: 0.005,
            sigma_max: 0.05,
            lambda_div: 0.01,
            n_candidates: 1,
            mutate_scope: MutateScope::ActorOnly,
        }
    }
}

impl PoemConfig {
    /// Plain PPO expressed as a POEM configuration.
    pub fn disabled() -> Self {
        Self {
            lambda_div: 0.0,
            delta: TRIGGER_DISABLED,
            ..Self::default()
        }
    }

    /// `delta` may be zero or negative: that is how the trigger is switched off.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta {} outside [0, 1]", self.beta));
        }
        if !self.delta.is_finite() {
            return bad(format!("delta {} must be finite", self.delta));
        }
        if !(self.sigma_min >= 0.0 && self.sigma_min <= self.sigma_max && self.sigma_max.is_finite()) {
            return bad(format!(
                "need 0 <= sigma_min <= sigma_max, got {} and {}",
                self.sigma_min, self.sigma_max
            ));
        }
        if !(self.lambda_div >= 0.0) {
            return bad(format!("lambda_div {} must be nonnegative", self.lambda_div));
        }
        if self.n_candidates == 0 {
            return bad("n_candidates must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmaTracker {
    pub theta_hat: ParamVector,
    pub beta: f64,
}

impl EmaTracker {
    pub fn new(initial: &ParamVector, beta: f64) -> Self {
        Self {
            theta_hat: initial.clone(),
            beta,
        }
    }

    /// `θ̂ ← β·θ̂ + (1-β)·θ`, elementwise.
    pub fn update(&mut self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.theta_hat.len() {
            return Err(Error::dims("EMA parameters", self.theta_hat.len(), theta.len()));
        }
        let b = self.beta;
        for (h, t) in self.theta_hat.as_mut_slice().iter_mut().zip(theta.iter()) {
            *h = b * *h + (1.0 - b) * t;
        }
        Ok(())
    }
}

pub fn ema_update(tracker: &EmaTracker, theta: &ParamVector) -> Result<EmaTracker> {
    let mut next = tracker.clone();
    next.update(theta)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityMetrics {
    pub d_post: f64,
    /// Present iff the mutation was triggered.
    pub sigma_used: Option<f64>,
    pub mutation_triggered: bool,
    pub mutation_accepted: bool,
    /// `L_total` of the post-step parameters.
    pub l_total_before: f64,
    /// Lowest finite candidate `L_total`, when triggered.
    pub l_total_after: Option<f64>,
}

/// `log π_ref(a_i | s_i)` under the reference parameters for the given samples.
pub fn reference_log_probs(
    ac: &ActorCritic,
    reference: &ParamVector,
    batch: &RolloutBatch,
    indices: &[usize],
) -> Result<Vec<f64>> {
    indices
        .iter()
        .map(|&i| {
            let tr = batch
                .transitions
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("sample index {i} out of range")))?;
            let lp = ac.distribution_under(reference, &tr.obs)?.log_prob(&tr.action)?;
            if lp.is_finite() {
                Ok(lp)
            } else {
                Err(Error::Numerical(format!("reference log-prob of sample {i} is {lp}")))
            }
        })
        .collect()
}

fn kl_on(ac: &ActorCritic, reference: &ParamVector, batch: &RolloutBatch, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::InvalidArgument("KL estimate needs at least one sample".into()));
    }
    let reference_lp = reference_log_probs(ac, reference, batch, indices)?;
    let mut sum = 0.0;
    for (&i, r) in indices.iter().zip(&reference_lp) {
        let tr = &batch.transitions[i];
        let lp = ac.distribution(&tr.obs)?.log_prob(&tr.action)?;
        if !lp.is_finite() {
            return Err(Error::Numerical(format!("log-prob of sample {i} is {lp}")));
        }
        sum += lp - r;
    }
    Ok(sum / indices.len() as f64)
}

/// Monte-Carlo `D_KL(π_θ ‖ π_θ̂)` over the batch's stored state-action pairs.
///
/// The actions come from the collection-time policy, so the estimate can be
/// negative.
pub fn kl_divergence_mc(ac: &ActorCritic, reference: &ParamVector, batch: &RolloutBatch) -> Result<f64> {
    let all: Vec<usize> = (0..batch.len()).collect();
    kl_on(ac, reference, batch, &all)
}

pub fn total_loss(
    ac: &ActorCritic,
    reference: &ParamVector,
    batch: &RolloutBatch,
    indices: &[usize],
    ppo: &PpoConfig,
    poem: &PoemConfig,
) -> Result<LossBreakdown> {
    let reference_lp = reference_log_probs(ac, reference, batch, indices)?;
    let term = DiversityTerm {
        lambda_div: poem.lambda_div,
        reference_log_probs: &reference_lp,
    };
    Ok(minibatch_loss(ac, batch, indices, ppo, Some(term), false)?.0)
}

/// Linear map of stagnation depth `(δ - d_post)/δ` onto `[σ_min, σ_max]`, clamped.
pub fn mutation_sigma(d_post: f64, config: &PoemConfig) -> f64 {
    let (lo, hi) = (config.sigma_min, config.sigma_max);
    let sigma = lo + (hi - lo) * (config.delta - d_post) / config.delta;
    if sigma.is_nan() {
        return hi;
    }
    sigma.clamp(lo, hi)
}

/// Index of the lowest finite candidate loss (earliest on ties).
pub fn best_candidate(losses: &[Option<f64>]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, l) in losses.iter().enumerate() {
        if let Some(l) = l.filter(|l| l.is_finite()) {
            if best.is_none_or(|(_, b)| l < b) {
                best = Some((j, l));
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub accepted: bool,
    pub best_loss: Option<f64>,
}

/// Perturbs `params[scope]` with `N(0, σ²)` noise `n_candidates` times and
/// adopts the best candidate iff its loss is strictly below `incumbent_loss`.
///
/// `loss` returning `Err(Error::Numerical)` disqualifies that candidate;
/// any other error aborts.
pub fn mutate_and_select_with<R, F>(
    params: &mut ParamVector,
    scope: Range<usize>,
    sigma: f64,
    n_candidates: usize,
    incumbent_loss: f64,
    rng: &mut R,
    mut loss: F,
) -> Result<SelectionOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(&ParamVector) -> Result<f64>,
{
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma {sigma} must be nonnegative")));
    }
    if scope.end > params.len() {
        return Err(Error::dims("mutation scope", params.len(), scope.end));
    }
    let mut candidates = Vec::with_capacity(n_candidates);
    let mut losses = Vec::with_capacity(n_candidates);
    for _ in 0..n_candidates {
        let mut candidate = params.clone();
        for p in &mut candidate.as_mut_slice()[scope.clone()] {
            let z: f64 = rng.sample(StandardNormal);
            *p += sigma * z;
        }
        let l = match loss(&candidate) {
            Ok(l) if l.is_finite() => Some(l),
            Ok(_) | Err(Error::Numerical(_)) => None,
            Err(e) => return Err(e),
        };
        candidates.push(candidate);
        losses.push(l);
    }
    let best = best_candidate(&losses);
    let accepted = matches!(best, Some((_, l)) if l < incumbent_loss);
    if accepted {
        let (j, _) = best.expect("accepted implies a best candidate");
        *params = candidates.swap_remove(j);
    }
    Ok(SelectionOutcome {
        accepted,
        best_loss: best.map(|(_, l)| l),
    })
}

/// Mutation step on one minibatch against precomputed reference log-probs.
#[allow(clippy::too_many_arguments)]
pub fn mutate_and_select<R: Rng + ?Sized>(
    ac: &mut ActorCritic,
    batch: &RolloutBatch,
    indices: &[usize],
    reference_lp: &[f64],
    sigma: f64,
    ppo: &PpoConfig,
    poem: &PoemConfig,
    rng: &mut R,
) -> Result<DiversityMetrics> {
    let term = DiversityTerm {
        lambda_div: poem.lambda_div,
        reference_log_probs: reference_lp,
    };
    let incumbent = minibatch_loss(ac, batch, indices, ppo, Some(term), false)?.0;
    let scope = poem.mutate_scope.range(ac);
    let mut params = ac.params().clone();
    let mut probe = ac.clone();
    let outcome = mutate_and_select_with(
        &mut params,
        scope,
        sigma,
        poem.n_candidates,
        incumbent.l_total,
        rng,
        |candidate| {
            probe.set_params(candidate.clone())?;
            Ok(minibatch_loss(&probe, batch, indices, ppo, Some(term), false)?
                .0
                .l_total)
        },
    )?;
    if outcome.accepted {
        ac.set_params(params)?;
    }
    Ok(DiversityMetrics {
        d_post: incumbent.kl_div,
        sigma_used: Some(sigma),
        mutation_triggered: true,
        mutation_accepted: outcome.accepted,
        l_total_before: incumbent.l_total,
        l_total_after: outcome.best_loss,
    })
}

/// POEM update: PPO epochs with the diversity bonus, EMA tracking and the
/// post-step mutation check on every minibatch.
#[allow(clippy::too_many_arguments)]
pub fn poem_update<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    ac: &mut ActorCritic,
    ema: &mut EmaTracker,
    batch: &RolloutBatch,
    ppo: &PpoConfig,
    poem: &PoemConfig,
    adam: &mut AdamState,
    shuffle_rng: &mut R1,
    mutation_rng: &mut R2,
) -> Result<UpdateDiagnostics> {
    let mut diagnostics = UpdateDiagnostics::default();
    for epoch in 0..ppo.epochs {
        for (k, indices) in minibatch_indices(batch.len(), ppo.minibatch_size, shuffle_rng)
            .into_iter()
            .enumerate()
        {
            let record = poem_minibatch(ac, ema, batch, &indices, ppo, poem, adam, mutation_rng)
                .map_err(|e| at_minibatch(epoch, k, e))?;
            let (losses, grad_norm, diversity) = record;
            diagnostics.minibatches.push(MinibatchRecord {
                epoch,
                minibatch: k,
                losses,
                grad_norm,
                diversity: Some(diversity),
            });
        }
    }
    Ok(diagnostics)
}

#[allow(clippy::too_many_arguments)]
fn poem_minibatch<R: Rng + ?Sized>(
    ac: &mut ActorCritic,
    ema: &mut EmaTracker,
    batch: &RolloutBatch,
    indices: &[usize],
    ppo: &PpoConfig,
    poem: &PoemConfig,
    adam: &mut AdamState,
    mutation_rng: &mut R,
) -> Result<(LossBreakdown, f64, DiversityMetrics)> {
    let pre_reference = reference_log_probs(ac, &ema.theta_hat, batch, indices)?;
    let term = DiversityTerm {
        lambda_div: poem.lambda_div,
        reference_log_probs: &pre_reference,
    };
    let (losses, grad_norm) = gradient_step(ac, batch, indices, ppo, Some(term), adam)?;

    ema.update(ac.params())?;
    let post_reference = reference_log_probs(ac, &ema.theta_hat, batch, indices)?;
    let post_term = DiversityTerm {
        lambda_div: poem.lambda_div,
        reference_log_probs: &post_reference,
    };
    let post = minibatch_loss(ac, batch, indices, ppo, Some(post_term), false)?.0;
    let d_post = post.kl_div;

    let diversity = if d_post < poem.delta {
        let sigma = mutation_sigma(d_post, poem);
        mutate_and_select(ac, batch, indices, &post_reference, sigma, ppo, poem, mutation_rng)?
    } else {
        DiversityMetrics {
            d_post,
            sigma_used: None,
            mutation_triggered: false,
            mutation_accepted: false,
            l_total_before: post.l_total,
            l_total_after: None,
        }
    };
    Ok((losses, grad_norm, diversity))
}
