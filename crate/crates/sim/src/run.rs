//! Trial orchestration: seeds x algorithms on a worker pool, one collector writing files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use diland::metrics::{mean_curve, plateau_detector, Trajectory, Verdict, PLATEAU_WINDOW};
use diland::network::{generate_scaled_deployment, Network};
use diland::trial::{run_trial, TrialSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::output::{write_network_json, write_sensor_errors_csv, write_trajectory_csv};

/// Environment variable that overrides the worker pool size.
pub const THREADS_ENV: &str = "DILAND_SIM_THREADS";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid {THREADS_ENV}: {0}")]
    Threads(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub mean_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub name: String,
    pub trials_ok: usize,
    pub trials_failed: usize,
    /// Seed-mean normalized MSE at `T/4`, `T/2` and `T`.
    pub checkpoints: Vec<Checkpoint>,
    /// Plateau detector on the seed-mean curve; `None` when the horizon is too short.
    pub verdict: Option<Verdict>,
    pub mean_rebuild_failures: Option<f64>,
    pub max_abs_state: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedTrial {
    pub algorithm: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<AlgorithmSummary>,
    pub failed_trials: Vec<FailedTrial>,
}

impl Summary {
    pub fn algorithm(&self, name: &str) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.name == name)
    }

    pub fn all_ok(&self) -> bool {
        self.failed_trials.is_empty()
    }
}

/// Everything a run produced, in memory.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    /// `(algorithm, seed, trajectory)` in config order, failed trials omitted.
    pub trajectories: Vec<(String, u64, Trajectory<f64>)>,
    /// Successfully generated networks by seed.
    pub networks: Vec<(u64, Network<f64>)>,
}

/// Pool size: `DILAND_SIM_THREADS` if set, otherwise the available parallelism.
pub fn pool_size() -> Result<usize, RunError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(RunError::Threads(v)),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn csv_path(dir: &Path, algorithm: &str, seed: u64) -> PathBuf {
    dir.join(format!("{algorithm}_seed{seed}.csv"))
}

/// Runs every (seed, algorithm) trial and keeps the results in memory.
pub fn simulate(cfg: &ExperimentConfig, threads: usize) -> Result<Outcome, RunError> {
    let seeds = cfg.seeds.seeds();
    let hash = cfg.hash();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;

    let networks: Vec<Result<Network<f64>, String>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| {
                generate_scaled_deployment(
                    cfg.network.dim,
                    cfg.network.n_sensors,
                    cfg.network.scale,
                    cfg.network.comm_radius,
                    s,
                )
                .map_err(|e| format!("deployment: {e}"))
            })
            .collect()
    });

    let jobs: Vec<(usize, usize)> = (0..cfg.algorithms.len())
        .flat_map(|a| (0..seeds.len()).map(move |s| (a, s)))
        .collect();
    let results: Vec<Result<Trajectory<f64>, String>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(a, s)| {
                let net = networks[s].as_ref().map_err(Clone::clone)?;
                let alg = &cfg.algorithms[a];
                let mut spec = TrialSpec::new(alg.kind, alg.weights(), cfg.horizon, seeds[s]);
                spec.allow_non_square_summable = cfg.allow_non_square_summable;
                spec.sensor_error_stride = cfg.output.sensor_error_stride;
                let mut traj = run_trial(net, &cfg.channel, &spec).map_err(|e| e.to_string())?;
                traj.algorithm = alg.label();
                traj.config_hash = Some(hash.clone());
                Ok(traj)
            })
            .collect()
    });

    let mut trajectories = Vec::new();
    let mut failed = Vec::new();
    let mut per_alg: Vec<Vec<Trajectory<f64>>> = vec![Vec::new(); cfg.algorithms.len()];
    for (&(a, s), r) in jobs.iter().zip(results) {
        let name = cfg.algorithms[a].label();
        match r {
            Ok(t) => {
                per_alg[a].push(t.clone());
                trajectories.push((name, seeds[s], t));
            }
            Err(error) => failed.push(FailedTrial {
                algorithm: name,
                seed: seeds[s],
                error,
            }),
        }
    }

    let algorithms = cfg
        .algorithms
        .iter()
        .zip(&per_alg)
        .map(|(alg, trajs)| summarize(alg.label(), trajs, cfg.horizon, seeds.len()))
        .collect();
    let summary = Summary {
        config_hash: hash,
        horizon: cfg.horizon,
        seeds,
        algorithms,
        failed_trials: failed,
    };
    let networks = summary
        .seeds
        .iter()
        .zip(networks)
        .filter_map(|(&s, n)| n.ok().map(|n| (s, n)))
        .collect();
    Ok(Outcome {
        summary,
        trajectories,
        networks,
    })
}

fn summarize(name: String, trajs: &[Trajectory<f64>], horizon: u64, n_seeds: usize) -> AlgorithmSummary {
    let curves: Vec<Vec<f64>> = trajs.iter().map(Trajectory::mse).collect();
    let mean = mean_curve(&curves);
    let checkpoints = [horizon / 4, horizon / 2, horizon]
        .into_iter()
        .map(|t| Checkpoint {
            t,
            mean_mse: mean.get(t as usize).copied(),
        })
        .collect();
    let n = trajs.len() as f64;
    AlgorithmSummary {
        name,
        trials_ok: trajs.len(),
        trials_failed: n_seeds - trajs.len(),
        checkpoints,
        verdict: plateau_detector(&mean, PLATEAU_WINDOW).ok(),
        mean_rebuild_failures: (!trajs.is_empty())
            .then(|| trajs.iter().map(|t| t.total_rebuild_failures() as f64).sum::<f64>() / n),
        max_abs_state: trajs.iter().map(|t| t.max_abs_state).reduce(f64::max),
    }
}

/// Runs the experiment and writes the CSVs, network documents and `summary.json`.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<Summary, RunError> {
    let dir = &cfg.output.dir;
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let outcome = simulate(cfg, threads)?;
    for (name, seed, traj) in &outcome.trajectories {
        let path = csv_path(dir, name, *seed);
        write_trajectory_csv(traj, &path).map_err(io_err(&path))?;
        if cfg.output.sensor_error_stride.is_some() {
            let path = dir.join(format!("{name}_seed{seed}_sensors.csv"));
            write_sensor_errors_csv(traj, &path).map_err(io_err(&path))?;
        }
    }
    if cfg.output.networks {
        for (seed, net) in &outcome.networks {
            let path = dir.join(format!("network_seed{seed}.json"));
            write_network_json(net, &path).map_err(io_err(&path))?;
        }
    }
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&outcome.summary).expect("summary serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(outcome.summary)
}
