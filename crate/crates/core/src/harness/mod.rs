//! Files-on-disk layer: configs, checkpoints, CSV logs, and the
//! train/evaluate/compare/tune pipelines.

pub mod checkpoint;
pub mod compare;
pub mod config;
pub mod evaluate;
pub mod train;
pub mod tune;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use checkpoint::Checkpoint;
pub use compare::{compare_dirs, ComparisonRow, SampleUnit};
pub use config::{Algo, ConfigFile, RunConfig};
pub use evaluate::{evaluate_checkpoint, EvalOptions};
pub use train::{train, TrainSummary};
pub use tune::{tune, TuneSpec};

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub(crate) fn walk(dir: &Path, visit: &mut dyn FnMut(&Path)) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    paths.sort();
    for p in paths {
        if p.is_dir() {
            walk(&p, visit)?;
        } else {
            visit(&p);
        }
    }
    Ok(())
}

/// Output directory for one seed of a multi-seed run.
pub fn seed_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("seed_{seed}"))
}

/// Trains `seeds` in parallel worker threads, one directory per seed.
/// Results come back in seed order.
pub fn train_seeds(config: &RunConfig, seeds: &[u64], root: &Path) -> Vec<Result<TrainSummary>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let mut cfg = config.clone();
                cfg.seed = seed;
                let dir = seed_dir(root, seed);
                scope.spawn(move || train(&cfg, &dir))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Numerical("training thread panicked".into())))
            })
            .collect()
    })
}
