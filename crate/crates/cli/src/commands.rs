use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use bicl_core::env::generate::{generate_graph, Density};
use bicl_core::learners::{load_bundle, save_bundle};
use bicl_core::{
    evaluate, r_gap, save_full_action, train_bicl, train_full_action, EnvInstance, EvalMode, PenaltySchedule,
    TrainResult,
};

use crate::config::ExperimentConfig;
use crate::csv_out::{csv_err, sig6, write_metrics_csv, writer};
use crate::error::{CliError, Result};

pub const SUMMARY_HEADER: [&str; 7] = ["c", "seed", "episodes", "t_reward", "rl_reward", "r_gap", "convergence_episode"];
pub const COMPARE_HEADER: [&str; 5] = ["seed", "learner", "convergence_episode", "final_t_reward", "episodes"];

/// Parses `1,2,5` and inclusive ranges such as `1..4` (or a mix).
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || CliError::Usage(format!("bad seed list entry {part:?}"));
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if b < a {
                return Err(bad());
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().map_err(|_| bad())?);
        }
    }
    if seeds.is_empty() {
        return Err(CliError::Usage("no seeds given".into()));
    }
    Ok(seeds)
}

pub fn parse_c_values(spec: &str) -> Result<Vec<f64>> {
    let values = spec
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|c| c.is_finite() && *c >= 0.0)
                .ok_or_else(|| CliError::Usage(format!("bad c value {p:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(CliError::Usage("no c values given".into()));
    }
    Ok(values)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn resolved(config: &ExperimentConfig, seed: u64, dir: &Path) -> ExperimentConfig {
    let mut c = config.clone();
    c.train.seed = seed;
    c.output_dir = dir.to_path_buf();
    c
}

/// Builds the environment and rejects bad configs before anything touches the disk.
fn checked_env(config: &ExperimentConfig) -> Result<EnvInstance> {
    let env = config.env()?;
    config.train.validate()?;
    config.train.check_env(&env)?;
    Ok(env)
}

/// Trains one bi-level run and writes `metrics.csv`, `config.json` and `snapshot/` into `dir`.
pub fn train_run(config: &ExperimentConfig, seed: u64, dir: &Path) -> Result<TrainResult> {
    let resolved = resolved(config, seed, dir);
    let env = checked_env(&resolved)?;
    create_dir(dir)?;
    resolved.write(&dir.join("config.json"))?;
    let result = train_bicl(&env, &resolved.train)?;
    write_metrics_csv(&result.metrics, &dir.join("metrics.csv"))?;
    save_bundle(&result.bundle, &env.spec(), &resolved.train.learner, result.final_c_k, &dir.join("snapshot"))?;
    Ok(result)
}

/// Full-action baseline counterpart of [`train_run`].
pub fn baseline_run(config: &ExperimentConfig, seed: u64, dir: &Path) -> Result<TrainResult<bicl_core::FullActionBundle>> {
    let resolved = resolved(config, seed, dir);
    let env = checked_env(&resolved)?;
    create_dir(dir)?;
    resolved.write(&dir.join("config.json"))?;
    let result = train_full_action(&env, &resolved.train)?;
    write_metrics_csv(&result.metrics, &dir.join("metrics.csv"))?;
    save_full_action(&result.bundle, &env.spec(), &resolved.train.learner, &dir.join("snapshot"))?;
    Ok(result)
}

pub fn run_dir(config: &ExperimentConfig, output: Option<&Path>) -> PathBuf {
    output.map_or_else(|| config.output_dir.join(&config.label), Path::to_path_buf)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub t_reward: f64,
    pub rl_reward: f64,
    pub r_gap: f64,
}

pub fn eval_snapshot(dir: &Path, rollouts: usize, seed: u64, c_k: Option<f64>) -> Result<EvalReport> {
    let (bundle, manifest) = load_bundle(dir)?;
    let env = EnvInstance::from_spec(&manifest.env)?;
    let c_k = c_k.unwrap_or(manifest.penalty_weight);
    let t_reward = evaluate(&bundle, &env, rollouts, EvalMode::TReward, seed, c_k)?;
    let rl_reward = evaluate(&bundle, &env, rollouts, EvalMode::RlReward, seed, c_k)?;
    Ok(EvalReport {
        t_reward,
        rl_reward,
        r_gap: r_gap(rl_reward, t_reward),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub c: f64,
    pub seed: u64,
    pub episodes: usize,
    pub t_reward: f64,
    pub rl_reward: f64,
    pub r_gap: f64,
    pub convergence_episode: Option<usize>,
}

/// Worker count for sweeps, from `BICL_THREADS` (default 1).
pub fn sweep_threads() -> usize {
    std::env::var("BICL_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(1)
}

/// Runs `jobs` on up to `threads` workers and returns results in job order.
fn run_parallel<J: Sync, T: Send>(jobs: &[J], threads: usize, work: impl Fn(&J) -> Result<T> + Sync) -> Result<Vec<T>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::SeqCst);
                if j >= jobs.len() {
                    break;
                }
                let out = work(&jobs[j]);
                slots.lock().expect("worker panicked")[j] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// One training run per `(c, seed)`, each in its own directory, plus `summary.csv`.
pub fn sweep(config: &ExperimentConfig, c_values: &[f64], seeds: &[u64], dir: &Path, threads: usize) -> Result<Vec<SweepRow>> {
    create_dir(dir)?;
    let jobs: Vec<(f64, u64)> = c_values.iter().flat_map(|&c| seeds.iter().map(move |&s| (c, s))).collect();
    let rows = run_parallel(&jobs, threads, |&(c, seed)| {
        let mut cfg = config.clone();
        let s = cfg.train.schedule;
        cfg.train.schedule = PenaltySchedule::new(c, s.beta_sched, s.h)?;
        let run = dir.join(format!("c-{}", sig6(c))).join(format!("seed-{seed}"));
        let result = train_run(&cfg, seed, &run)?;
        let last = result
            .final_record()
            .ok_or_else(|| CliError::Config("run produced no metrics".into()))?;
        Ok(SweepRow {
            c,
            seed,
            episodes: last.episode,
            t_reward: last.t_reward,
            rl_reward: last.rl_reward,
            r_gap: last.r_gap,
            convergence_episode: result.convergence_episode,
        })
    })?;
    let path = dir.join("summary.csv");
    let mut w = writer(&path)?;
    let err = csv_err(&path);
    w.write_record(SUMMARY_HEADER).map_err(&err)?;
    for r in &rows {
        w.write_record([
            sig6(r.c),
            r.seed.to_string(),
            r.episodes.to_string(),
            sig6(r.t_reward),
            sig6(r.rl_reward),
            sig6(r.r_gap),
            r.convergence_episode.map_or(String::new(), |e| e.to_string()),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub seed: u64,
    pub learner: &'static str,
    pub convergence_episode: Option<usize>,
    pub final_t_reward: f64,
    pub episodes: usize,
}

/// Bi-level and full-action runs per seed, plus `compare.csv`.
pub fn compare(config: &ExperimentConfig, seeds: &[u64], dir: &Path, threads: usize) -> Result<Vec<CompareRow>> {
    create_dir(dir)?;
    let jobs: Vec<(u64, bool)> = seeds.iter().flat_map(|&s| [(s, true), (s, false)]).collect();
    let rows = run_parallel(&jobs, threads, |&(seed, bicl)| {
        let (learner, metrics, conv) = if bicl {
            let r = train_run(config, seed, &dir.join("bicl").join(format!("seed-{seed}")))?;
            ("bicl", r.metrics, r.convergence_episode)
        } else {
            let r = baseline_run(config, seed, &dir.join("baseline").join(format!("seed-{seed}")))?;
            ("baseline", r.metrics, r.convergence_episode)
        };
        let last = metrics.last().ok_or_else(|| CliError::Config("run produced no metrics".into()))?;
        Ok(CompareRow {
            seed,
            learner,
            convergence_episode: conv,
            final_t_reward: last.t_reward,
            episodes: last.episode,
        })
    })?;
    let path = dir.join("compare.csv");
    let mut w = writer(&path)?;
    let err = csv_err(&path);
    w.write_record(COMPARE_HEADER).map_err(&err)?;
    for r in &rows {
        w.write_record([
            r.seed.to_string(),
            r.learner.to_string(),
            r.convergence_episode.map_or(String::new(), |e| e.to_string()),
            sig6(r.final_t_reward),
            r.episodes.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(rows)
}

pub fn gen_graph(nodes: usize, robots: usize, density: Density, seed: u64, output: Option<&Path>) -> Result<String> {
    let instance = generate_graph(nodes, robots, density, seed)?;
    let text = serde_json::to_string_pretty(&instance).map_err(|e| CliError::Config(e.to_string()))? + "\n";
    if let Some(path) = output {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        fs::write(path, &text).map_err(|e| CliError::io(path, e))?;
    }
    Ok(text)
}
