use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{make_env, EnvId};
use crate::policy::ActorCritic;
use crate::rollout::{collect, compute_gae, RolloutBatch};

/// A small policy plus a collected batch with advantages filled in.
pub(crate) fn batch_for(id: EnvId, seed: u64, n_steps: usize) -> (ActorCritic, RolloutBatch) {
    let env = make_env(id, seed).unwrap();
    let ac = ActorCritic::new(
        env.observation_dim(),
        &env.action_space(),
        &[8, 8],
        env.observation_scale(),
        seed,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let mut batch = collect(env, seed, &ac, n_steps, &mut rng).unwrap();
    compute_gae(&mut batch, 0.99, 0.95).unwrap();
    (ac, batch)
}
