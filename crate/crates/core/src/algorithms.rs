//! Iterative location updates.
//!
//! All updates are synchronous: every sensor reads the same snapshot `X(t)`.
//!
//! * [`diloc_step`]: `X <- P X + B U`.
//! * [`diland_step`]: `X <- (1 - α) X + α (P X + B U)` with `P`, `B` built from the
//!   running distance estimates.
//! * [`dlre_step`] and [`diland_random_step`]: the same relaxation where every exchanged
//!   state passes through an unreliable link, scaled by `e/q` and hit by additive noise.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{sample_comm_noise, sample_link, CommNoiseModel, LinkModel};
use crate::linalg::Matrix;
use crate::network::{Network, SystemMatrices};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgorithmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid weight sequence: {0}")]
    InvalidWeight(String),
    #[error("weight exponent {delta} is not square summable (needs delta > 0.5) with link failures or communication noise")]
    WeightNotSquareSummable { delta: f64 },
}

/// Decreasing weights `α(t) = a / (t + 1)^δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence<S> {
    pub a: S,
    pub delta: S,
}

impl<S: Scalar> WeightSequence<S> {
    pub fn new(a: S, delta: S) -> Result<Self, AlgorithmError> {
        let w = Self { a, delta };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), AlgorithmError> {
        if !(self.a > S::zero()) || !self.a.is_finite() {
            return Err(AlgorithmError::InvalidWeight("scale a must be positive".into()));
        }
        if !(self.delta > S::zero() && self.delta <= S::one()) {
            return Err(AlgorithmError::InvalidWeight("delta out of (0,1]".into()));
        }
        Ok(())
    }

    /// `Σ α(t)² < ∞` holds exactly when `δ > 1/2`.
    pub fn square_summable(&self) -> bool {
        self.delta > S::lit(0.5)
    }

    /// Unclamped weight `a / (t + 1)^δ`.
    pub fn weight(&self, t: u64) -> S {
        self.a / S::lit((t + 1) as f64).powf(self.delta)
    }

    /// Weight used by the updates: clamped to 1 while `a / (t + 1)^δ` still exceeds it.
    pub fn alpha(&self, t: u64) -> S {
        self.weight(t).min(S::one())
    }
}

pub fn weight<S: Scalar>(w: &WeightSequence<S>, t: u64) -> S {
    w.weight(t)
}

/// Sensor states `X(t)` (`M x m`), the iteration counter and the fixed anchor matrix `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmState<S> {
    x: Matrix<S>,
    t: u64,
    anchors: Matrix<S>,
}

impl<S: Scalar> AlgorithmState<S> {
    pub fn new(x: Matrix<S>, anchors: Matrix<S>) -> Result<Self, AlgorithmError> {
        if x.cols() != anchors.cols() || anchors.rows() != anchors.cols() + 1 {
            return Err(AlgorithmError::DimensionMismatch(format!(
                "states are {:?}, anchors are {:?}",
                x.shape(),
                anchors.shape()
            )));
        }
        Ok(Self { x, t: 0, anchors })
    }

    pub fn x(&self) -> &Matrix<S> {
        &self.x
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn anchors(&self) -> &Matrix<S> {
        &self.anchors
    }

    /// Replaces the states of sensor `i` with the ones in `from` (used to hold sensors
    /// that have no usable weights yet).
    pub fn restore_row(&mut self, i: usize, from: &Matrix<S>) {
        self.x.row_mut(i).copy_from_slice(from.row(i));
    }

    fn check(&self, sys: &SystemMatrices<S>) -> Result<(), AlgorithmError> {
        let m = self.x.rows();
        if sys.p.shape() != (m, m) || sys.b.shape() != (m, self.anchors.rows()) {
            return Err(AlgorithmError::DimensionMismatch(format!(
                "{m} sensor states against P {:?} and B {:?}",
                sys.p.shape(),
                sys.b.shape()
            )));
        }
        Ok(())
    }

    fn advanced(&self, x: Matrix<S>) -> Self {
        Self {
            x,
            t: self.t + 1,
            anchors: self.anchors.clone(),
        }
    }
}

/// `P X + B U`.
fn barycentric_map<S: Scalar>(state: &AlgorithmState<S>, sys: &SystemMatrices<S>) -> Matrix<S> {
    sys.p.mul(&state.x).add(&sys.b.mul(&state.anchors))
}

pub fn diloc_step<S: Scalar>(
    state: &AlgorithmState<S>,
    sys: &SystemMatrices<S>,
) -> Result<AlgorithmState<S>, AlgorithmError> {
    state.check(sys)?;
    Ok(state.advanced(barycentric_map(state, sys)))
}

/// Relaxed update with an explicit weight `alpha`.
pub fn diland_step_alpha<S: Scalar>(
    state: &AlgorithmState<S>,
    alpha: S,
    sys: &SystemMatrices<S>,
) -> Result<AlgorithmState<S>, AlgorithmError> {
    state.check(sys)?;
    let target = barycentric_map(state, sys);
    let x = state.x.scale(S::one() - alpha).add(&target.scale(alpha));
    Ok(state.advanced(x))
}

/// `x^j(t+1) = (1 - α(t)) x^j(t) + α(t) [P x^j(t) + B u^j]` for every component `j`.
pub fn diland_step<S: Scalar>(
    state: &AlgorithmState<S>,
    w: &WeightSequence<S>,
    sys: &SystemMatrices<S>,
) -> Result<AlgorithmState<S>, AlgorithmError> {
    diland_step_alpha(state, w.alpha(state.t), sys)
}

/// Column of `[P | B]` a triangulation member maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Sensor(usize),
    Anchor(usize),
}

/// One realized exchange `n -> l`: gain `e_ln / q_ln` and additive noise `v_ln`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeEntry<S> {
    pub column: Column,
    pub gain: S,
    pub noise: Vec<S>,
}

/// Realized link states and communication noise of one iteration, one entry per
/// member of each sensor's triangulation set.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange<S> {
    pub entries: Vec<Vec<ExchangeEntry<S>>>,
    /// True when the draw came from a channel with failures or noise.
    pub randomized: bool,
}

impl<S: Scalar> Exchange<S> {
    /// Perfect exchange: every link up with `q = 1` and no noise.
    pub fn ideal(net: &Network<S>) -> Self {
        let m = net.dim;
        let entries = (0..net.num_sensors())
            .map(|i| {
                net.triangulation[i]
                    .iter()
                    .map(|&n| ExchangeEntry {
                        column: column_of(net, n),
                        gain: S::one(),
                        noise: vec![S::zero(); m],
                    })
                    .collect()
            })
            .collect();
        Self {
            entries,
            randomized: false,
        }
    }

    /// Samples `e_ln(t)` from `links` and `v_ln(t)` from `noise`, each from its own stream.
    pub fn sample<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        net: &Network<S>,
        links: Option<&LinkModel<S>>,
        noise: Option<&CommNoiseModel<S>>,
        link_rng: &mut R1,
        noise_rng: &mut R2,
    ) -> Self {
        let m = net.dim;
        let slots = m + 1;
        let v = noise.map(|model| sample_comm_noise(model, net.num_sensors() * slots, m, noise_rng));
        let entries = (0..net.num_sensors())
            .map(|i| {
                let l = net.sensor_id(i);
                net.triangulation[i]
                    .iter()
                    .enumerate()
                    .map(|(s, &n)| {
                        let gain = match links {
                            Some(model) => {
                                let q = model.q(l, n);
                                if sample_link(q, link_rng) {
                                    S::one() / q
                                } else {
                                    S::zero()
                                }
                            }
                            None => S::one(),
                        };
                        let noise = match &v {
                            Some(v) => v.row(i * slots + s).to_vec(),
                            None => vec![S::zero(); m],
                        };
                        ExchangeEntry {
                            column: column_of(net, n),
                            gain,
                            noise,
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            entries,
            randomized: links.is_some() || noise.is_some(),
        }
    }
}

fn column_of<S: Scalar>(net: &Network<S>, n: crate::network::NodeId) -> Column {
    match net.anchor_index(n) {
        Some(k) => Column::Anchor(k),
        None => Column::Sensor(net.sensor_index(n).expect("node id in range")),
    }
}

/// Relaxed update through unreliable links with an explicit weight `alpha`:
/// `x_l <- (1-α) x_l + α Σ_{n ∈ Θ_l} (e_ln/q_ln) w_ln (y_n + v_ln)`, `y_n` the state of
/// sensor `n` or the position of anchor `n`.
pub fn random_step_alpha<S: Scalar>(
    state: &AlgorithmState<S>,
    alpha: S,
    sys: &SystemMatrices<S>,
    exchange: &Exchange<S>,
) -> Result<AlgorithmState<S>, AlgorithmError> {
    state.check(sys)?;
    let (rows, m) = state.x.shape();
    if exchange.entries.len() != rows {
        return Err(AlgorithmError::DimensionMismatch(format!(
            "exchange covers {} sensors, state has {rows}",
            exchange.entries.len()
        )));
    }
    let mut x = state.x.scale(S::one() - alpha);
    for (l, entries) in exchange.entries.iter().enumerate() {
        for e in entries {
            if e.noise.len() != m {
                return Err(AlgorithmError::DimensionMismatch("noise width".into()));
            }
            let (weight, y) = match e.column {
                Column::Sensor(n) => (sys.p[(l, n)], state.x.row(n)),
                Column::Anchor(k) => (sys.b[(l, k)], state.anchors.row(k)),
            };
            let coef = alpha * e.gain * weight;
            if coef == S::zero() {
                continue;
            }
            for j in 0..m {
                x[(l, j)] += coef * (y[j] + e.noise[j]);
            }
        }
    }
    Ok(state.advanced(x))
}

/// Current-sample update with link failures and communication noise.
pub fn dlre_step<S: Scalar>(
    state: &AlgorithmState<S>,
    w: &WeightSequence<S>,
    sys: &SystemMatrices<S>,
    exchange: &Exchange<S>,
) -> Result<AlgorithmState<S>, AlgorithmError> {
    random_step_alpha(state, w.alpha(state.t), sys, exchange)
}

/// Running-estimate update with link failures and communication noise.
///
/// Rejects a weight sequence that is not square summable when the exchange is
/// randomized, unless `allow_non_square_summable` is set.
pub fn diland_random_step<S: Scalar>(
    state: &AlgorithmState<S>,
    w: &WeightSequence<S>,
    sys: &SystemMatrices<S>,
    exchange: &Exchange<S>,
    allow_non_square_summable: bool,
) -> Result<AlgorithmState<S>, AlgorithmError> {
    if exchange.randomized && !w.square_summable() && !allow_non_square_summable {
        return Err(AlgorithmError::WeightNotSquareSummable {
            delta: w.delta.as_f64(),
        });
    }
    random_step_alpha(state, w.alpha(state.t), sys, exchange)
}
