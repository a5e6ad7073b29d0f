//! One simulated run: measurement, estimation, matrix rebuild and state update per
//! iteration, recorded as a [`Trajectory`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{
    diland_random_step, diland_step, diloc_step, dlre_step, random_step_alpha, AlgorithmError,
    AlgorithmState, Exchange, WeightSequence,
};
use crate::channel::{ChannelConfig, ChannelError};
use crate::estimation::{corrected_sample, DistanceEstimateState, EstimationError};
use crate::linalg::Matrix;
use crate::metrics::{normalized_mse, MetricsError, SensorErrorRecord, Trajectory, TrajectoryRecord};
use crate::network::{
    assemble_row, sample_in_simplex, DistanceSet, Network, NetworkError, Pair, SystemMatrices,
};
use crate::rng::{stream, SimRng, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlgorithmKind {
    Diloc,
    Dlre,
    Diland,
    /// Average `warmup` samples per pair, freeze the matrices, then iterate.
    TrainThenRun { warmup: u64 },
}

impl AlgorithmKind {
    pub fn name(&self) -> String {
        match self {
            AlgorithmKind::Diloc => "diloc".into(),
            AlgorithmKind::Dlre => "dlre".into(),
            AlgorithmKind::Diland => "diland".into(),
            AlgorithmKind::TrainThenRun { warmup } => format!("train{warmup}"),
        }
    }
}

/// Everything that selects one run besides the network and channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec<S> {
    pub kind: AlgorithmKind,
    pub weights: WeightSequence<S>,
    /// Number of iterations; the trajectory holds `horizon + 1` records.
    pub horizon: u64,
    pub seed: u64,
    /// Accept `δ <= 1/2` together with link failures or communication noise.
    #[serde(default)]
    pub allow_non_square_summable: bool,
    /// Record per-sensor squared errors every this many iterations.
    #[serde(default)]
    pub sensor_error_stride: Option<u64>,
}

impl<S: Scalar> TrialSpec<S> {
    pub fn new(kind: AlgorithmKind, weights: WeightSequence<S>, horizon: u64, seed: u64) -> Self {
        Self {
            kind,
            weights,
            horizon,
            seed,
            allow_non_square_summable: false,
            sensor_error_stride: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrialError {
    #[error("invalid trial: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("iteration {t}: {source}")]
    Estimation { t: u64, source: EstimationError },
    #[error("iteration {t}: {source}")]
    Algorithm { t: u64, source: AlgorithmError },
    #[error("iteration {t}: non-finite sensor state")]
    NonFinite { t: u64 },
}

/// Uniform draw inside the anchor hull for every sensor.
pub fn initial_state<S: Scalar>(net: &Network<S>, seed: u64) -> Matrix<S> {
    let mut rng = stream(seed, Stream::InitialState);
    let vertices: Vec<Vec<S>> = net.anchors.iter().map(|a| a.position.clone()).collect();
    let rows: Vec<Vec<S>> = (0..net.num_sensors())
        .map(|_| sample_in_simplex(&vertices, &mut rng))
        .collect();
    Matrix::from_rows(&rows)
}

/// Per-trial random sources, one stream each.
struct Sources {
    distance: SimRng,
    links: SimRng,
    noise: SimRng,
}

impl Sources {
    fn new(seed: u64) -> Self {
        Self {
            distance: stream(seed, Stream::Distance),
            links: stream(seed, Stream::Links),
            noise: stream(seed, Stream::CommNoise),
        }
    }
}

/// Draws one corrected sample for every pair (in sorted order) into the estimator.
fn measure<S: Scalar>(
    net: &Network<S>,
    channel: &ChannelConfig<S>,
    pairs: &[Pair],
    est: &mut DistanceEstimateState<S>,
    rng: &mut SimRng,
    t: u64,
) -> Result<(), TrialError> {
    for &p in pairs {
        let d = net.true_distance(p.first(), p.second());
        let sample = corrected_sample(&channel.distance, d, rng);
        est.update_running_average(p, sample, t)
            .map_err(|source| TrialError::Estimation { t, source })?;
    }
    Ok(())
}

/// Rebuilds every row of `sys` from `dists`. A row whose distances fail the geometry
/// checks keeps its previous weights; returns the number of such rows.
fn rebuild<S: Scalar>(
    net: &Network<S>,
    dists: &DistanceSet<S>,
    sys: &mut SystemMatrices<S>,
    valid: &mut [bool],
) -> u32 {
    let mut failures = 0;
    for (i, ok) in valid.iter_mut().enumerate() {
        match assemble_row(net, i, dists) {
            Ok(coords) => {
                sys.set_row(net, i, &coords);
                *ok = true;
            }
            Err(_) => failures += 1,
        }
    }
    failures
}

struct Recorder<'a, S> {
    traj: Trajectory<S>,
    truth: &'a Matrix<S>,
    x0: Matrix<S>,
    stride: Option<u64>,
}

impl<S: Scalar> Recorder<'_, S> {
    fn record(&mut self, t: u64, x: &Matrix<S>, rebuild_failures: u32) -> Result<(), TrialError> {
        if !x.is_finite() {
            return Err(TrialError::NonFinite { t });
        }
        let mse = normalized_mse(x, self.truth, &self.x0)?;
        self.traj.records.push(TrajectoryRecord {
            t,
            mse,
            rebuild_failures,
        });
        self.traj.max_abs_state = self.traj.max_abs_state.max(x.max_abs());
        if let Some(k) = self.stride {
            if k > 0 && t % k == 0 {
                let squared_errors = (0..x.rows())
                    .map(|i| {
                        x.row(i)
                            .iter()
                            .zip(self.truth.row(i))
                            .map(|(&a, &b)| (a - b) * (a - b))
                            .sum()
                    })
                    .collect();
                self.traj.sensor_errors.push(SensorErrorRecord { t, squared_errors });
            }
        }
        Ok(())
    }
}

/// Runs one trial from `X(0)` drawn inside the anchor hull.
///
/// Every iteration measures all required pairs, updates the running means, rebuilds
/// `P` and `B` (running means for DILAND, latest samples otherwise) and applies one
/// update. Sensors that never had a usable row hold their state.
pub fn run_trial<S: Scalar>(
    net: &Network<S>,
    channel: &ChannelConfig<S>,
    spec: &TrialSpec<S>,
) -> Result<Trajectory<S>, TrialError> {
    let x0 = initial_state(net, spec.seed);
    run_trial_from(net, channel, spec, x0)
}

/// [`run_trial`] with an explicit initial state.
pub fn run_trial_from<S: Scalar>(
    net: &Network<S>,
    channel: &ChannelConfig<S>,
    spec: &TrialSpec<S>,
    x0: Matrix<S>,
) -> Result<Trajectory<S>, TrialError> {
    if let AlgorithmKind::TrainThenRun { warmup } = spec.kind {
        return run_trial_train_then_fixed(net, channel, spec, warmup, x0);
    }
    let randomized = check(net, channel, spec)?;
    if randomized && spec.kind == AlgorithmKind::Diland && !spec.weights.square_summable() && !spec.allow_non_square_summable {
        return Err(TrialError::Algorithm {
            t: 0,
            source: AlgorithmError::WeightNotSquareSummable {
                delta: spec.weights.delta.as_f64(),
            },
        });
    }

    let truth = net.ground_truth();
    let pairs = net.required_pairs();
    let mut est = DistanceEstimateState::new(pairs.iter().copied());
    let mut src = Sources::new(spec.seed);
    let mut sys = SystemMatrices::zeros(net.num_sensors(), net.num_anchors());
    let mut valid = vec![false; net.num_sensors()];
    let mut state = AlgorithmState::new(x0.clone(), net.anchor_matrix())
        .map_err(|source| TrialError::Algorithm { t: 0, source })?;
    let mut rec = Recorder {
        traj: Trajectory::new(spec.kind.name(), spec.seed),
        truth: &truth,
        x0,
        stride: spec.sensor_error_stride,
    };
    rec.record(0, state.x(), 0)?;

    for t in 0..spec.horizon {
        measure(net, channel, &pairs, &mut est, &mut src.distance, t)?;
        let dists = match spec.kind {
            AlgorithmKind::Diland => est.current_estimates(),
            _ => est.latest_samples(),
        }
        .map_err(|source| TrialError::Estimation { t, source })?;
        let failures = rebuild(net, &dists, &mut sys, &mut valid);

        let exchange = draw_exchange(net, channel, randomized, &mut src);
        let step = match spec.kind {
            AlgorithmKind::Diloc => diloc_step(&state, &sys),
            AlgorithmKind::Dlre => dlre_step(&state, &spec.weights, &sys, &exchange),
            AlgorithmKind::Diland if randomized => diland_random_step(
                &state,
                &spec.weights,
                &sys,
                &exchange,
                spec.allow_non_square_summable,
            ),
            _ => diland_step(&state, &spec.weights, &sys),
        };
        let mut next = step.map_err(|source| TrialError::Algorithm { t, source })?;
        for (i, _) in valid.iter().enumerate().filter(|(_, ok)| !**ok) {
            next.restore_row(i, state.x());
        }
        state = next;
        rec.record(t + 1, state.x(), failures)?;
    }
    Ok(rec.traj)
}

/// Baseline: `warmup` iterations of measuring only (states held), then `P`, `B` are
/// frozen from the averaged distances and the relaxed update runs with weights
/// restarted at `α(0)`. The horizon counts the warmup iterations.
pub fn run_trial_train_then_fixed<S: Scalar>(
    net: &Network<S>,
    channel: &ChannelConfig<S>,
    spec: &TrialSpec<S>,
    warmup: u64,
    x0: Matrix<S>,
) -> Result<Trajectory<S>, TrialError> {
    if warmup == 0 {
        return Err(TrialError::InvalidSpec("warmup must be at least 1".into()));
    }
    let randomized = check(net, channel, spec)?;
    let truth = net.ground_truth();
    let pairs = net.required_pairs();
    let mut est = DistanceEstimateState::new(pairs.iter().copied());
    let mut src = Sources::new(spec.seed);
    let mut sys = SystemMatrices::zeros(net.num_sensors(), net.num_anchors());
    let mut valid = vec![false; net.num_sensors()];
    let mut state = AlgorithmState::new(x0.clone(), net.anchor_matrix())
        .map_err(|source| TrialError::Algorithm { t: 0, source })?;
    let mut rec = Recorder {
        traj: Trajectory::new(spec.kind.name(), spec.seed),
        truth: &truth,
        x0,
        stride: spec.sensor_error_stride,
    };
    rec.record(0, state.x(), 0)?;

    for t in 0..spec.horizon {
        let mut failures = 0;
        if t < warmup {
            measure(net, channel, &pairs, &mut est, &mut src.distance, t)?;
            if t + 1 == warmup {
                let dists = est
                    .current_estimates()
                    .map_err(|source| TrialError::Estimation { t, source })?;
                failures = rebuild(net, &dists, &mut sys, &mut valid);
            }
        } else {
            let exchange = draw_exchange(net, channel, randomized, &mut src);
            let alpha = spec.weights.alpha(t - warmup);
            let mut next = random_step_alpha(&state, alpha, &sys, &exchange)
                .map_err(|source| TrialError::Algorithm { t, source })?;
            for (i, _) in valid.iter().enumerate().filter(|(_, ok)| !**ok) {
                next.restore_row(i, state.x());
            }
            state = next;
        }
        rec.record(t + 1, state.x(), failures)?;
    }
    Ok(rec.traj)
}

fn check<S: Scalar>(
    net: &Network<S>,
    channel: &ChannelConfig<S>,
    spec: &TrialSpec<S>,
) -> Result<bool, TrialError> {
    if spec.horizon == 0 {
        return Err(TrialError::InvalidSpec("horizon must be at least 1".into()));
    }
    spec.weights
        .validate()
        .map_err(|source| TrialError::Algorithm { t: 0, source })?;
    channel.validate()?;
    net.validate()?;
    Ok(channel.has_exchange_randomness())
}

fn draw_exchange<S: Scalar>(
    net: &Network<S>,
    channel: &ChannelConfig<S>,
    randomized: bool,
    src: &mut Sources,
) -> Exchange<S> {
    if randomized {
        Exchange::sample(
            net,
            channel.links.as_ref(),
            channel.comm_noise.as_ref(),
            &mut src.links,
            &mut src.noise,
        )
    } else {
        Exchange::ideal(net)
    }
}
