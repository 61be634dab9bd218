//! Run configuration: TOML file with `[ppo]` and `[poem]` sections.
//!
//! Every field is optional in the file; missing ones take per-environment
//! defaults. Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::poem::{MutateScope, PoemConfig, TRIGGER_DISABLED};
use crate::ppo::PpoConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Ppo,
    Poem,
}

impl Algo {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::Ppo => "ppo",
            Algo::Poem => "poem",
        }
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppo" => Ok(Algo::Ppo),
            "poem" => Ok(Algo::Poem),
            other => Err(Error::Config(format!("unknown algo {other:?} (expected ppo or poem)"))),
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoSection {
    pub clip_epsilon: Option<f64>,
    pub alpha_vf: Option<f64>,
    pub alpha_ent: Option<f64>,
    pub epochs: Option<usize>,
    pub minibatch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    /// `0` disables clipping.
    pub max_grad_norm: Option<f64>,
    pub gamma: Option<f64>,
    pub lam: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoemSection {
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub lambda_div: Option<f64>,
    pub n_candidates: Option<usize>,
    pub mutate_scope: Option<String>,
}

/// The file as written: everything optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub env: Option<String>,
    pub algo: Option<Algo>,
    pub seed: Option<u64>,
    pub total_timesteps: Option<usize>,
    pub n_steps: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    /// Iterations between periodic checkpoints; `0` keeps only the final one.
    pub checkpoint_every: Option<usize>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub ppo: PpoSection,
    #[serde(default)]
    pub poem: PoemSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvId,
    pub algo: Algo,
    pub seed: u64,
    pub total_timesteps: usize,
    pub n_steps: usize,
    pub hidden: Vec<usize>,
    pub checkpoint_every: usize,
    pub output_dir: Option<PathBuf>,
    pub ppo: PpoConfig,
    pub poem: PoemConfig,
}

pub fn default_timesteps(env: EnvId) -> usize {
    match env {
        EnvId::MountainCarContinuous => 150_000,
        _ => 250_000,
    }
}

pub fn default_ppo(env: EnvId) -> PpoConfig {
    let alpha_ent = match env {
        EnvId::MountainCarContinuous => 0.01,
        _ => 0.0,
    };
    PpoConfig {
        alpha_ent,
        ..PpoConfig::default()
    }
}

impl RunConfig {
    pub fn defaults(env: EnvId, algo: Algo) -> Self {
        Self::resolve(&ConfigFile {
            env: Some(env.as_str().to_string()),
            algo: Some(algo),
            ..ConfigFile::default()
        })
        .expect("defaults are valid")
    }

    /// Fills unset fields with defaults and validates the result.
    pub fn resolve(file: &ConfigFile) -> Result<Self> {
        let env: EnvId = file
            .env
            .as_deref()
            .ok_or_else(|| Error::Config("env is required".into()))?
            .parse()
            .map_err(|e: Error| Error::Config(e.to_string()))?;
        let algo = file.algo.unwrap_or(Algo::Poem);
        let d = default_ppo(env);
        let p = &file.ppo;
        let ppo = PpoConfig {
            clip_epsilon: p.clip_epsilon.unwrap_or(d.clip_epsilon),
            alpha_vf: p.alpha_vf.unwrap_or(d.alpha_vf),
            alpha_ent: p.alpha_ent.unwrap_or(d.alpha_ent),
            epochs: p.epochs.unwrap_or(d.epochs),
            minibatch_size: p.minibatch_size.unwrap_or(d.minibatch_size),
            learning_rate: p.learning_rate.unwrap_or(d.learning_rate),
            max_grad_norm: match p.max_grad_norm {
                Some(0.0) => None,
                Some(g) => Some(g),
                None => d.max_grad_norm,
            },
            gamma: p.gamma.unwrap_or(d.gamma),
            lam: p.lam.unwrap_or(d.lam),
        };
        let dp = PoemConfig::default();
        let q = &file.poem;
        let mut poem = PoemConfig {
            beta: q.beta.unwrap_or(dp.beta),
            delta: q.delta.unwrap_or(dp.delta),
            sigma_min: q.sigma_min.unwrap_or(dp.sigma_min),
            sigma_max: q.sigma_max.unwrap_or(dp.sigma_max),
            lambda_div: q.lambda_div.unwrap_or(dp.lambda_div),
            n_candidates: q.n_candidates.unwrap_or(dp.n_candidates),
            mutate_scope: match &q.mutate_scope {
                Some(s) => MutateScope::parse(s)?,
                None => dp.mutate_scope,
            },
        };
        if algo == Algo::Ppo {
            poem.lambda_div = 0.0;
            poem.delta = TRIGGER_DISABLED;
        }
        let cfg = Self {
            env,
            algo,
            seed: file.seed.unwrap_or(0),
            total_timesteps: file.total_timesteps.unwrap_or_else(|| default_timesteps(env)),
            n_steps: file.n_steps.unwrap_or(2048),
            hidden: file.hidden.clone().unwrap_or_else(|| vec![64, 64]),
            checkpoint_every: file.checkpoint_every.unwrap_or(10),
            output_dir: file.output_dir.clone(),
            ppo,
            poem,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be at least 1".into()));
        }
        if self.total_timesteps < self.n_steps {
            return Err(Error::Config(format!(
                "total_timesteps {} is below n_steps {}",
                self.total_timesteps, self.n_steps
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        self.ppo.validate(self.n_steps)?;
        self.poem.validate()
    }

    /// Number of collect/update iterations the budget buys.
    pub fn iterations(&self) -> usize {
        self.total_timesteps.div_ceil(self.n_steps)
    }

    /// Fully populated file form, suitable as a reproducible snapshot.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            env: Some(self.env.as_str().to_string()),
            algo: Some(self.algo),
            seed: Some(self.seed),
            total_timesteps: Some(self.total_timesteps),
            n_steps: Some(self.n_steps),
            hidden: Some(self.hidden.clone()),
            checkpoint_every: Some(self.checkpoint_every),
            output_dir: self.output_dir.clone(),
            ppo: PpoSection {
                clip_epsilon: Some(self.ppo.clip_epsilon),
                alpha_vf: Some(self.ppo.alpha_vf),
                alpha_ent: Some(self.ppo.alpha_ent),
                epochs: Some(self.ppo.epochs),
                minibatch_size: Some(self.ppo.minibatch_size),
                learning_rate: Some(self.ppo.learning_rate),
                max_grad_norm: Some(self.ppo.max_grad_norm.unwrap_or(0.0)),
                gamma: Some(self.ppo.gamma),
                lam: Some(self.ppo.lam),
            },
            poem: PoemSection {
                beta: Some(self.poem.beta),
                delta: Some(self.poem.delta),
                sigma_min: Some(self.poem.sigma_min),
                sigma_max: Some(self.poem.sigma_max),
                lambda_div: Some(self.poem.lambda_div),
                n_candidates: Some(self.poem.n_candidates),
                mutate_scope: Some(self.poem.mutate_scope.as_str().to_string()),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_per_env() {
        let mc = RunConfig::defaults(EnvId::MountainCarContinuous, Algo::Poem);
        assert_eq!(mc.total_timesteps, 150_000);
        assert_eq!(mc.ppo.alpha_ent, 0.01);
        assert_eq!(mc.poem, PoemConfig::default());
        let sl = RunConfig::defaults(EnvId::SparseLander, Algo::Ppo);
        assert_eq!(sl.total_timesteps, 250_000);
        assert_eq!(sl.ppo.alpha_ent, 0.0);
        assert_eq!(sl.poem.lambda_div, 0.0);
        assert_eq!(sl.poem.delta, TRIGGER_DISABLED);
    }

    #[test]
    fn snapshot_round_trips() {
        let text = r#"
            env = "sparse_lander"
            algo = "poem"
            seed = 4
            n_steps = 512
            total_timesteps = 4096

            [ppo]
            learning_rate = 1e-3
            max_grad_norm = 0

            [poem]
            n_candidates = 3
            mutate_scope = "actor_and_critic"
        "#;
        let cfg = RunConfig::resolve(&ConfigFile::parse(text).unwrap()).unwrap();
        assert_eq!(cfg.ppo.max_grad_norm, None);
        assert_eq!(cfg.poem.mutate_scope, MutateScope::ActorAndCritic);
        let again = RunConfig::resolve(&ConfigFile::parse(&cfg.to_toml()).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(ConfigFile::parse("env = \"sparse_lander\"\nlearning_rat = 1.0").is_err());
        assert!(ConfigFile::parse("[ppo]\nclip = 0.1").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let base = |extra: &str| ConfigFile::parse(&format!("env = \"sparse_lander\"\n{extra}")).unwrap();
        assert!(RunConfig::resolve(&base("n_steps = 100\ntotal_timesteps = 50")).is_err());
        assert!(RunConfig::resolve(&base("[poem]\nbeta = 2.0")).is_err());
        assert!(RunConfig::resolve(&base("[poem]\nmutate_scope = \"all\"")).is_err());
        assert!(RunConfig::resolve(&ConfigFile::parse("env = \"cartpole\"").unwrap()).is_err());
        assert!(RunConfig::resolve(&ConfigFile::default()).is_err());
    }

    #[test]
    fn iteration_count_rounds_up() {
        let mut cfg = RunConfig::defaults(EnvId::SparseLander, Algo::Ppo);
        cfg.total_timesteps = cfg.n_steps;
        assert_eq!(cfg.iterations(), 1);
        cfg.total_timesteps = cfg.n_steps + 1;
        assert_eq!(cfg.iterations(), 2);
    }
}
