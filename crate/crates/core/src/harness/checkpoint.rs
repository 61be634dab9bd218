//! Binary checkpoint: `POEMCKPT`, format version (u32 LE), header length
//! (u32 LE), a JSON header, then the parameter vector bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Algo;
use crate::envs::{Env, EnvId, ObsScale};
use crate::error::{Error, Result};
use crate::nn::{MlpSpec, ParamVector};
use crate::policy::{ActorCritic, PolicyHead};

const MAGIC: &[u8; 8] = b"POEMCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub env: String,
    pub algo: Algo,
    pub actor_sizes: Vec<usize>,
    pub critic_sizes: Vec<usize>,
    /// `gaussian` or `categorical`.
    pub head: String,
    pub obs_offset: Vec<f64>,
    pub obs_scale: Vec<f64>,
    pub iteration: usize,
    pub global_step: usize,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub policy: ActorCritic,
}

impl Checkpoint {
    pub fn new(env: EnvId, algo: Algo, ac: &ActorCritic, iteration: usize, global_step: usize) -> Self {
        let head = match ac.head() {
            PolicyHead::DiagGaussian { .. } => "gaussian",
            PolicyHead::Categorical { .. } => "categorical",
        };
        Self {
            header: CheckpointHeader {
                env: env.as_str().to_string(),
                algo,
                actor_sizes: ac.actor_spec().layer_sizes().to_vec(),
                critic_sizes: ac.critic_spec().layer_sizes().to_vec(),
                head: head.to_string(),
                obs_offset: ac.obs_scale().offset.clone(),
                obs_scale: ac.obs_scale().scale.clone(),
                iteration,
                global_step,
            },
            policy: ac.clone(),
        }
    }

    pub fn env_id(&self) -> Result<EnvId> {
        self.header
            .env
            .parse()
            .map_err(|e: Error| Error::Checkpoint(e.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.policy.params().len() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&self.policy.params().to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let rest = bytes.strip_prefix(MAGIC).ok_or_else(|| bad("missing POEMCKPT magic"))?;
        let (version, rest) = rest.split_first_chunk::<4>().ok_or_else(|| bad("truncated version"))?;
        if u32::from_le_bytes(*version) != VERSION {
            return Err(bad("unsupported checkpoint version"));
        }
        let (len, rest) = rest
            .split_first_chunk::<4>()
            .ok_or_else(|| bad("truncated header length"))?;
        let len = u32::from_le_bytes(*len) as usize;
        if rest.len() < len {
            return Err(bad("truncated header"));
        }
        let (header, params) = rest.split_at(len);
        let header: CheckpointHeader =
            serde_json::from_slice(header).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        let params = ParamVector::from_bytes(params).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let actor = MlpSpec::new(header.actor_sizes.clone())?;
        let critic = MlpSpec::new(header.critic_sizes.clone())?;
        let head = match header.head.as_str() {
            "gaussian" => PolicyHead::DiagGaussian {
                action_dim: actor.output_dim(),
            },
            "categorical" => PolicyHead::Categorical {
                n_actions: actor.output_dim(),
            },
            other => return Err(Error::Checkpoint(format!("unknown head {other:?}"))),
        };
        let obs_scale = ObsScale {
            offset: header.obs_offset.clone(),
            scale: header.obs_scale.clone(),
        };
        let policy = ActorCritic::from_parts(actor, critic, head, obs_scale, params)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Self { header, policy })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("bin.tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Rejects a checkpoint whose shapes do not fit `env`.
    pub fn check_compatible(&self, env: &dyn Env) -> Result<()> {
        if self.policy.obs_dim() != env.observation_dim() {
            return Err(Error::dims(
                "checkpoint observation",
                env.observation_dim(),
                self.policy.obs_dim(),
            ));
        }
        let expected = PolicyHead::for_space(&env.action_space());
        if self.policy.head() != expected {
            return Err(Error::Checkpoint(format!(
                "policy head {:?} does not match {}'s action space {:?}",
                self.policy.head(),
                env.id(),
                expected
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_env;

    fn sample(id: EnvId) -> Checkpoint {
        let env = make_env(id, 0).unwrap();
        let ac = ActorCritic::new(
            env.observation_dim(),
            &env.action_space(),
            &[8, 4],
            env.observation_scale(),
            1,
        )
        .unwrap();
        Checkpoint::new(id, Algo::Poem, &ac, 3, 6144)
    }

    #[test]
    fn round_trip_is_exact() {
        for id in [EnvId::MountainCarContinuous, EnvId::SparseLander] {
            let c = sample(id);
            let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
            assert_eq!(back.header, c.header);
            assert_eq!(back.policy.params(), c.policy.params());
            assert_eq!(back.policy.head(), c.policy.head());
            assert_eq!(back.to_bytes(), c.to_bytes());
        }
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = sample(EnvId::SparseLander).to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Checkpoint::from_bytes(&bytes[1..]).is_err());
        let mut flipped = bytes.clone();
        flipped[20] ^= 0xff;
        assert!(Checkpoint::from_bytes(&flipped).is_err());
        assert!(Checkpoint::from_bytes(b"").is_err());
    }

    #[test]
    fn mismatched_env_is_rejected() {
        let c = sample(EnvId::SparseLander);
        let mc = make_env(EnvId::MountainCarContinuous, 0).unwrap();
        assert!(c.check_compatible(mc.as_ref()).is_err());
        let sl = make_env(EnvId::SparseLander, 0).unwrap();
        assert!(c.check_compatible(sl.as_ref()).is_ok());
    }
}
