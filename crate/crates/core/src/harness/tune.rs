//! Uniform random search in a relative box around a base configuration.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::csv_err;
use super::evaluate::{evaluate_checkpoint, EvalOptions};
use super::train::train;
use crate::error::{Error, Result};

pub const TUNED_PARAMS: [&str; 11] = [
    "learning_rate",
    "clip_epsilon",
    "alpha_vf",
    "alpha_ent",
    "gamma",
    "lam",
    "beta",
    "delta",
    "sigma_min",
    "sigma_max",
    "lambda_div",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TuneSpec {
    /// Half-width of the search box as a fraction of each center.
    pub relative_bound: f64,
    pub n_trials: usize,
    pub trial_timesteps: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    pub eval_seed_base: u64,
}

impl Default for TuneSpec {
    fn default() -> Self {
        Self {
            relative_bound: 0.1,
            n_trials: 20,
            trial_timesteps: 100_000,
            eval_episodes: 4,
            seed: 0,
            eval_seed_base: 2_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub index: usize,
    pub config: RunConfig,
    /// Mean evaluation reward, `-inf` when the trial failed.
    pub score: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub trials: Vec<Trial>,
    pub best: usize,
    pub trials_csv: PathBuf,
    pub best_config: PathBuf,
}

fn param_values(c: &RunConfig) -> [f64; 11] {
    [
        c.ppo.learning_rate,
        c.ppo.clip_epsilon,
        c.ppo.alpha_vf,
        c.ppo.alpha_ent,
        c.ppo.gamma,
        c.ppo.lam,
        c.poem.beta,
        c.poem.delta,
        c.poem.sigma_min,
        c.poem.sigma_max,
        c.poem.lambda_div,
    ]
}

fn around<R: Rng + ?Sized>(rng: &mut R, center: f64, bound: f64) -> f64 {
    let half = (center * bound).abs();
    // One draw per parameter, even at a zero-width bound.
    let u: f64 = rng.random();
    if half == 0.0 {
        center
    } else {
        center - half + 2.0 * half * u
    }
}

/// Draws one trial configuration; values are clamped to their valid ranges.
pub fn sample_config<R: Rng + ?Sized>(base: &RunConfig, bound: f64, rng: &mut R) -> RunConfig {
    let mut c = base.clone();
    let unit = |x: f64| x.clamp(0.0, 1.0);
    c.ppo.learning_rate = around(rng, base.ppo.learning_rate, bound);
    c.ppo.clip_epsilon = around(rng, base.ppo.clip_epsilon, bound).clamp(1e-6, 1.0 - 1e-6);
    c.ppo.alpha_vf = around(rng, base.ppo.alpha_vf, bound).max(0.0);
    c.ppo.alpha_ent = around(rng, base.ppo.alpha_ent, bound).max(0.0);
    c.ppo.gamma = unit(around(rng, base.ppo.gamma, bound));
    c.ppo.lam = unit(around(rng, base.ppo.lam, bound));
    c.poem.beta = unit(around(rng, base.poem.beta, bound));
    c.poem.delta = around(rng, base.poem.delta, bound);
    c.poem.sigma_min = around(rng, base.poem.sigma_min, bound).max(0.0);
    c.poem.sigma_max = around(rng, base.poem.sigma_max, bound).max(c.poem.sigma_min);
    c.poem.lambda_div = around(rng, base.poem.lambda_div, bound).max(0.0);
    c
}

fn run_trial(config: &RunConfig, spec: &TuneSpec, dir: &Path) -> Result<f64> {
    let summary = train(config, dir)?;
    if let Some(f) = summary.failure {
        return Err(Error::Numerical(f));
    }
    let opts = EvalOptions {
        n_episodes: spec.eval_episodes,
        seed_base: spec.eval_seed_base,
        ..EvalOptions::default()
    };
    Ok(evaluate_checkpoint(&summary.final_checkpoint, dir, "trial", &opts)?
        .report
        .mean)
}

pub fn tune(spec: &TuneSpec, base: &RunConfig, out_dir: &Path) -> Result<TuneResult> {
    tune_with_progress(spec, base, out_dir, |_| {})
}

pub fn tune_with_progress(
    spec: &TuneSpec,
    base: &RunConfig,
    out_dir: &Path,
    mut progress: impl FnMut(&Trial),
) -> Result<TuneResult> {
    if spec.n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    if !(spec.relative_bound >= 0.0) {
        return Err(Error::Config("relative_bound must be nonnegative".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut trials = Vec::with_capacity(spec.n_trials);
    for index in 0..spec.n_trials {
        let mut config = sample_config(base, spec.relative_bound, &mut rng);
        config.total_timesteps = spec.trial_timesteps.max(config.n_steps);
        config.checkpoint_every = 0;
        let dir = out_dir.join(format!("trial_{index:03}"));
        let outcome = config.validate().and_then(|_| run_trial(&config, spec, &dir));
        let (score, error) = match outcome {
            Ok(s) => (s, None),
            Err(e) => (f64::NEG_INFINITY, Some(e.to_string())),
        };
        let trial = Trial {
            index,
            config,
            score,
            error,
        };
        progress(&trial);
        trials.push(trial);
    }
    let best = trials
        .iter()
        .fold(0, |b, t| if t.score > trials[b].score { t.index } else { b });

    let trials_csv = out_dir.join("trials.csv");
    let mut w = csv::Writer::from_path(&trials_csv).map_err(|e| csv_err(&trials_csv, e))?;
    let mut header = vec!["trial", "score"];
    header.extend(TUNED_PARAMS);
    header.push("error");
    w.write_record(&header).map_err(|e| csv_err(&trials_csv, e))?;
    for t in &trials {
        let mut row = vec![t.index.to_string(), t.score.to_string()];
        row.extend(param_values(&t.config).iter().map(f64::to_string));
        row.push(t.error.clone().unwrap_or_default());
        w.write_record(&row).map_err(|e| csv_err(&trials_csv, e))?;
    }
    w.flush().map_err(|e| Error::io(&trials_csv, e))?;

    let best_config = out_dir.join("best_config.toml");
    let mut chosen = trials[best].config.clone();
    chosen.total_timesteps = base.total_timesteps;
    chosen.checkpoint_every = base.checkpoint_every;
    std::fs::write(&best_config, chosen.to_toml()).map_err(|e| Error::io(&best_config, e))?;
    Ok(TuneResult {
        trials,
        best,
        trials_csv,
        best_config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvId;
    use crate::harness::config::Algo;

    fn base() -> RunConfig {
        let mut c = RunConfig::defaults(EnvId::SparseLander, Algo::Poem);
        c.n_steps = 128;
        c.hidden = vec![8];
        c.ppo.epochs = 1;
        c
    }

    #[test]
    fn zero_bound_reproduces_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(sample_config(&base(), 0.0, &mut rng), base());
        }
    }

    #[test]
    fn samples_stay_in_bounds_and_valid() {
        let b = base();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let c = sample_config(&b, 0.1, &mut rng);
            c.validate().unwrap();
            for (v, centre) in param_values(&c).iter().zip(param_values(&b)) {
                assert!((v - centre).abs() <= 0.1 * centre.abs() + 1e-15);
            }
        }
    }

    #[test]
    fn sequence_is_seeded() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5)
                .map(|_| sample_config(&base(), 0.1, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn single_trial_is_returned() {
        let dir = tempfile::tempdir().unwrap();
        let spec = TuneSpec {
            n_trials: 1,
            trial_timesteps: 128,
            ..TuneSpec::default()
        };
        let r = tune(&spec, &base(), dir.path()).unwrap();
        assert_eq!(r.best, 0);
        assert!(r.trials[0].score.is_finite());
        let best = crate::harness::config::ConfigFile::load(&r.best_config).unwrap();
        let best = RunConfig::resolve(&best).unwrap();
        assert_eq!(best.ppo, r.trials[0].config.ppo);
        assert_eq!(csv::Reader::from_path(&r.trials_csv).unwrap().records().count(), 1);
    }

    #[test]
    fn failed_trials_score_negative_infinity() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = base();
        b.ppo.learning_rate = 1e300;
        b.ppo.max_grad_norm = None;
        let spec = TuneSpec {
            n_trials: 2,
            trial_timesteps: 512,
            ..TuneSpec::default()
        };
        let r = tune(&spec, &b, dir.path()).unwrap();
        assert_eq!(r.trials.len(), 2);
        for t in &r.trials {
            assert_eq!(t.score, f64::NEG_INFINITY);
            assert!(t.error.is_some());
        }
        assert_eq!(r.best, 0);
    }
}
