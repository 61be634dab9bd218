//! Welch comparison of two directories of evaluation CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::csv_err;
use super::evaluate::{EPISODES_FILE, EPISODES_HEADER};
use crate::error::{Error, Result};
use crate::stats::compare_runs;

pub const TABLE_HEADER: [&str; 9] = [
    "env",
    "t",
    "p",
    "significant",
    "mean_poem",
    "mean_ppo",
    "n_poem",
    "n_ppo",
    "dof",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleUnit {
    /// One sample per run: that run's mean evaluation reward.
    #[default]
    Runs,
    /// Every evaluation episode is a sample.
    Episodes,
}

impl std::str::FromStr for SampleUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "runs" => Ok(SampleUnit::Runs),
            "episodes" => Ok(SampleUnit::Episodes),
            other => Err(Error::InvalidArgument(format!(
                "unknown sample unit {other:?} (expected runs or episodes)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EvalRow {
    pub algo: String,
    pub env: String,
    pub run_id: String,
    pub episode: usize,
    pub seed: u64,
    pub total_reward: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub env: String,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
    pub mean_poem: f64,
    pub mean_ppo: f64,
    pub n_poem: usize,
    pub n_ppo: usize,
    pub dof: f64,
}

pub fn read_eval_csv(path: &Path) -> Result<Vec<EvalRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?;
    if header != EPISODES_HEADER.as_slice() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: format!("expected columns {}", EPISODES_HEADER.join(",")),
        });
    }
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<EvalRow>, _>>()
        .map_err(|e| csv_err(path, e))?;
    if rows.is_empty() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: "no episodes".into(),
        });
    }
    Ok(rows)
}

/// Every `eval_episodes.csv` under `root`, sorted by path.
pub fn find_eval_csvs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    super::walk(root, &mut |p| {
        if p.file_name().is_some_and(|n| n == EPISODES_FILE) {
            found.push(p.to_path_buf());
        }
    })?;
    found.sort();
    if found.is_empty() {
        return Err(Error::Csv {
            path: root.to_path_buf(),
            message: format!("no {EPISODES_FILE} found"),
        });
    }
    Ok(found)
}

/// Per-env samples from every evaluation CSV under `root`.
pub fn collect_samples(root: &Path, unit: SampleUnit) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for path in find_eval_csvs(root)? {
        let mut runs: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
        for row in read_eval_csv(&path)? {
            runs.entry((row.env, row.run_id)).or_default().push(row.total_reward);
        }
        for ((env, _), rewards) in runs {
            let samples = out.entry(env).or_default();
            match unit {
                SampleUnit::Runs => samples.push(rewards.iter().sum::<f64>() / rewards.len() as f64),
                SampleUnit::Episodes => samples.extend(rewards),
            }
        }
    }
    Ok(out)
}

/// One row per env present in both directories; `t < 0` when POEM is ahead.
pub fn compare_dirs(poem_dir: &Path, ppo_dir: &Path, alpha: f64, unit: SampleUnit) -> Result<Vec<ComparisonRow>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    let poem = collect_samples(poem_dir, unit)?;
    let ppo = collect_samples(ppo_dir, unit)?;
    let mut rows = Vec::new();
    for (env, a) in &poem {
        let Some(b) = ppo.get(env) else { continue };
        let c = compare_runs(a, b, alpha).map_err(|e| Error::UndefinedTest(format!("{env}: {e}")))?;
        rows.push(ComparisonRow {
            env: env.clone(),
            t: c.test.t_statistic,
            p: c.test.p_value,
            significant: c.significant,
            mean_poem: c.mean_poem,
            mean_ppo: c.mean_ppo,
            n_poem: a.len(),
            n_ppo: b.len(),
            dof: c.test.dof,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} and {} share no environment",
            poem_dir.display(),
            ppo_dir.display()
        )));
    }
    Ok(rows)
}

pub fn write_table(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(TABLE_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.env.clone(),
            format!("{:.4}", r.t),
            format!("{:.4}", r.p),
            if r.significant { "yes" } else { "no" }.to_string(),
            format!("{:.2}", r.mean_poem),
            format!("{:.2}", r.mean_ppo),
            r.n_poem.to_string(),
            r.n_ppo.to_string(),
            format!("{:.2}", r.dof),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Fixed-width text rendering for terminals.
pub fn format_table(rows: &[ComparisonRow]) -> String {
    let mut s = format!(
        "{:<26} {:>10} {:>8} {:>12} {:>10} {:>10}\n",
        "env", "t", "p", "significant", "mean_poem", "mean_ppo"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<26} {:>10.4} {:>8.4} {:>12} {:>10.2} {:>10.2}",
            r.env,
            r.t,
            r.p,
            if r.significant { "yes" } else { "no" },
            r.mean_poem,
            r.mean_ppo
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::welch_t_test;

    fn write_runs(root: &Path, algo: &str, env: &str, runs: &[&[f64]]) {
        for (k, rewards) in runs.iter().enumerate() {
            let dir = root.join(format!("seed_{k}"));
            std::fs::create_dir_all(&dir).unwrap();
            let mut w = csv::Writer::from_path(dir.join(EPISODES_FILE)).unwrap();
            w.write_record(EPISODES_HEADER).unwrap();
            for (i, r) in rewards.iter().enumerate() {
                w.write_record([
                    algo,
                    env,
                    &format!("seed_{k}"),
                    &i.to_string(),
                    &i.to_string(),
                    &r.to_string(),
                    "10",
                ])
                .unwrap();
            }
        }
    }

    #[test]
    fn self_comparison_is_null() {
        let dir = tempfile::tempdir().unwrap();
        write_runs(
            dir.path(),
            "poem",
            "sparse_lander",
            &[&[1.0, 2.0], &[5.0, 3.0], &[0.5, 0.0]],
        );
        write_runs(
            &dir.path().join("mc"),
            "poem",
            "mountain_car_continuous",
            &[&[90.0], &[80.0]],
        );
        for unit in [SampleUnit::Runs, SampleUnit::Episodes] {
            let rows = compare_dirs(dir.path(), dir.path(), 0.05, unit).unwrap();
            assert_eq!(rows.len(), 2);
            for r in rows {
                assert_eq!(r.t, 0.0);
                assert_eq!(r.p, 1.0);
                assert!(!r.significant);
            }
        }
    }

    #[test]
    fn matches_direct_welch_on_run_means() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_runs(
            a.path(),
            "poem",
            "sparse_lander",
            &[&[10.0, 12.0], &[14.0, 16.0], &[9.0, 9.0]],
        );
        write_runs(b.path(), "ppo", "sparse_lander", &[&[1.0, 3.0], &[-2.0, 0.0]]);
        let rows = compare_dirs(a.path(), b.path(), 0.05, SampleUnit::Runs).unwrap();
        let direct = welch_t_test(&[2.0, -1.0], &[11.0, 15.0, 9.0]).unwrap();
        assert_eq!(rows[0].t, direct.t_statistic);
        assert_eq!(rows[0].p, direct.p_value);
        assert!(rows[0].t < 0.0);

        let rows = compare_dirs(a.path(), b.path(), 0.05, SampleUnit::Episodes).unwrap();
        let direct = welch_t_test(&[1.0, 3.0, -2.0, 0.0], &[10.0, 12.0, 14.0, 16.0, 9.0, 9.0]).unwrap();
        assert_eq!(rows[0].t, direct.t_statistic);
        assert_eq!(rows[0].n_poem, 6);
    }

    #[test]
    fn table_format() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![ComparisonRow {
            env: "sparse_lander".into(),
            t: -2.5,
            p: 0.03,
            significant: true,
            mean_poem: 10.0,
            mean_ppo: 1.0,
            n_poem: 3,
            n_ppo: 3,
            dof: 3.9,
        }];
        let path = dir.path().join("t.csv");
        write_table(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "env,t,p,significant,mean_poem,mean_ppo,n_poem,n_ppo,dof\nsparse_lander,-2.5000,0.0300,yes,10.00,1.00,3,3,3.90\n"
        );
        assert!(format_table(&rows).contains("sparse_lander"));
    }

    #[test]
    fn malformed_inputs_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let run = dir.path().join("run");
        std::fs::create_dir_all(&run).unwrap();
        let path = run.join(EPISODES_FILE);
        std::fs::write(
            &path,
            "algo,env,run_id,episode,seed,total_reward,steps\npoem,x,r,0,0,1.0\n",
        )
        .unwrap();
        let err = compare_dirs(dir.path(), dir.path(), 0.05, SampleUnit::Runs).unwrap_err();
        assert!(err.to_string().contains(&*path.to_string_lossy()), "{err}");

        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        let err = compare_dirs(dir.path(), dir.path(), 0.05, SampleUnit::Runs).unwrap_err();
        assert!(err.to_string().contains(&*path.to_string_lossy()));

        let empty = tempfile::tempdir().unwrap();
        assert!(compare_dirs(empty.path(), dir.path(), 0.05, SampleUnit::Runs).is_err());
    }

    #[test]
    fn single_run_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_runs(dir.path(), "poem", "sparse_lander", &[&[1.0, 2.0]]);
        assert!(compare_dirs(dir.path(), dir.path(), 0.05, SampleUnit::Runs).is_err());
    }
}
