//! Error metrics, trajectories and convergence diagnostics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Window length (iterations) of the plateau detector.
pub const PLATEAU_WINDOW: usize = 1000;
/// Relative change between consecutive windows below which a run counts as plateaued.
pub const PLATEAU_REL_CHANGE: f64 = 0.05;
/// Default stride for per-sensor error records.
pub const SENSOR_ERROR_STRIDE: u64 = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("initial error is zero, normalized MSE undefined")]
    ZeroInitialError,
    #[error("need at least {needed} records, have {have}")]
    InsufficientLength { needed: usize, have: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// `(1/M) Σ_l Σ_j (x_l^j - x_l^j*)²`.
pub fn mean_squared_error<S: Scalar>(x: &Matrix<S>, x_star: &Matrix<S>) -> S {
    let m = S::lit(x.rows().max(1) as f64);
    x.iter()
        .zip(x_star.iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<S>()
        / m
}

/// Mean squared location error at `t` divided by its value at `t = 0`.
pub fn normalized_mse<S: Scalar>(
    x_t: &Matrix<S>,
    x_star: &Matrix<S>,
    x_0: &Matrix<S>,
) -> Result<S, MetricsError> {
    if x_t.shape() != x_star.shape() || x_0.shape() != x_star.shape() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{:?}, {:?}, {:?}",
            x_t.shape(),
            x_star.shape(),
            x_0.shape()
        )));
    }
    let denom = mean_squared_error(x_0, x_star);
    if denom < S::lit(1e-30) {
        return Err(MetricsError::ZeroInitialError);
    }
    Ok(mean_squared_error(x_t, x_star) / denom)
}

/// `Σ_{k=s}^{t-1} [Π_{l=k+1}^{t-1} (1 - r1(l))] r2(k)` with `r_i(t) = a_i / (t+1)^δ_i`,
/// `r1` clamped to at most 1.
pub fn weight_sum_diagnostic<S: Scalar>(a1: S, delta1: S, a2: S, delta2: S, s: u64, t: u64) -> S {
    if t <= s {
        return S::zero();
    }
    *weight_sum_series(a1, delta1, a2, delta2, s, t)
        .last()
        .expect("series is non-empty")
}

/// The diagnostic for every end point `s..=t_max`; element `i` is the value at
/// `t = s + i`. Uses the recursion `S(t+1) = (1 - r1(t)) S(t) + r2(t)`, `S(s) = 0`.
pub fn weight_sum_series<S: Scalar>(a1: S, delta1: S, a2: S, delta2: S, s: u64, t_max: u64) -> Vec<S> {
    let r = |a: S, d: S, l: u64| a / S::lit((l + 1) as f64).powf(d);
    let mut out = Vec::with_capacity((t_max.saturating_sub(s) + 1) as usize);
    let mut acc = S::zero();
    out.push(acc);
    for l in s..t_max {
        let r1 = r(a1, delta1, l).min(S::one());
        acc = (S::one() - r1) * acc + r(a2, delta2, l);
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converging,
    Plateaued,
}

/// Compares the mean of the last `window` values with the mean of the window before.
pub fn plateau_detector<S: Scalar>(mse: &[S], window: usize) -> Result<Verdict, MetricsError> {
    let needed = 2 * window;
    if window == 0 || mse.len() < needed {
        return Err(MetricsError::InsufficientLength {
            needed: needed.max(2),
            have: mse.len(),
        });
    }
    let n = mse.len();
    let w = S::lit(window as f64);
    let last = mse[n - window..].iter().copied().sum::<S>() / w;
    let prev = mse[n - needed..n - window].iter().copied().sum::<S>() / w;
    if prev == S::zero() {
        return Ok(if last == S::zero() {
            Verdict::Plateaued
        } else {
            Verdict::Converging
        });
    }
    if ((last - prev) / prev).abs() < S::lit(PLATEAU_REL_CHANGE) {
        Ok(Verdict::Plateaued)
    } else {
        Ok(Verdict::Converging)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord<S> {
    pub t: u64,
    pub mse: S,
    pub rebuild_failures: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorErrorRecord<S> {
    pub t: u64,
    pub squared_errors: Vec<S>,
}

/// Per-iteration normalized MSE of one trial plus optional per-sensor errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S> {
    pub algorithm: String,
    pub seed: u64,
    pub config_hash: Option<String>,
    pub records: Vec<TrajectoryRecord<S>>,
    pub sensor_errors: Vec<SensorErrorRecord<S>>,
    /// Largest `|x_l^j(t)|` seen over the whole run.
    pub max_abs_state: S,
}

impl<S: Scalar> Trajectory<S> {
    pub fn new(algorithm: impl Into<String>, seed: u64) -> Self {
        Self {
            algorithm: algorithm.into(),
            seed,
            config_hash: None,
            records: Vec::new(),
            sensor_errors: Vec::new(),
            max_abs_state: S::zero(),
        }
    }

    pub fn mse(&self) -> Vec<S> {
        self.records.iter().map(|r| r.mse).collect()
    }

    pub fn mse_at(&self, t: u64) -> Option<S> {
        self.records.iter().find(|r| r.t == t).map(|r| r.mse)
    }

    pub fn final_mse(&self) -> Option<S> {
        self.records.last().map(|r| r.mse)
    }

    pub fn total_rebuild_failures(&self) -> u64 {
        self.records.iter().map(|r| r.rebuild_failures as u64).sum()
    }

    pub fn verdict(&self, window: usize) -> Result<Verdict, MetricsError> {
        plateau_detector(&self.mse(), window)
    }
}

/// Pointwise mean of several MSE curves, truncated to the shortest one.
pub fn mean_curve<S: Scalar>(curves: &[Vec<S>]) -> Vec<S> {
    let Some(len) = curves.iter().map(Vec::len).min() else {
        return Vec::new();
    };
    let n = S::lit(curves.len() as f64);
    (0..len)
        .map(|i| curves.iter().map(|c| c[i]).sum::<S>() / n)
        .collect()
}
