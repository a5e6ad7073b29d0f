//! Consistent per-pair distance estimates: bias-corrected samples fed into running
//! means. One state object tracks exactly the pairs some sensor needs.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::channel::{gaussian_distance_raw, measure_distance_rss, measure_distance_toa, DistanceModel, ToaSample};
use crate::network::{DistanceSet, Pair};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("bias estimate must be positive")]
    NonpositiveCorrection,
    #[error("distance sample for {0:?} is not finite")]
    NonFiniteSample(Pair),
    #[error("pair {pair:?} expected sample index {expected}, got {got}")]
    OutOfOrderSample { pair: Pair, expected: u64, got: u64 },
    #[error("pair {0:?} is not tracked")]
    UntrackedPair(Pair),
    #[error("pair {0:?} has no samples yet")]
    MissingPair(Pair),
}

/// `d_hat / c_hat`: removes the multiplicative RSS bias.
pub fn bias_corrected_sample<S: Scalar>(d_hat: S, c_hat: S) -> Result<S, EstimationError> {
    if !(c_hat > S::zero()) {
        return Err(EstimationError::NonpositiveCorrection);
    }
    Ok(d_hat / c_hat)
}

/// `(T - μ̂_T) ν_p`: removes the TOA delay bias.
pub fn toa_corrected_sample<S: Scalar>(s: &ToaSample<S>, nu_p: S) -> S {
    (s.delay - s.mu_hat) * nu_p
}

/// One bias-corrected distance sample for a pair at true distance `d_true`.
///
/// The value is not floored: under heavy noise it can be nonpositive, and flooring it
/// here would bias the running mean upward on short links. Snapshots clamp instead.
pub fn corrected_sample<S: Scalar, R: Rng + ?Sized>(
    model: &DistanceModel<S>,
    d_true: S,
    rng: &mut R,
) -> S {
    match model {
        DistanceModel::Exact => d_true,
        DistanceModel::Gaussian { variance_fraction } => {
            gaussian_distance_raw(d_true, *variance_fraction, rng)
        }
        DistanceModel::Rss(p) => {
            let s = measure_distance_rss(d_true, p, rng);
            // c_hat is a positive lognormal multiple of a validated positive C.
            bias_corrected_sample(s.d_hat, s.c_hat).unwrap_or(s.d_hat)
        }
        DistanceModel::Toa(p) => toa_corrected_sample(&measure_distance_toa(d_true, p, rng), p.nu_p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PairEstimate<S> {
    count: u64,
    mean: S,
    latest: S,
}

/// Running means `d̄_ab(t)` for a fixed set of pairs, O(1) work and memory per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEstimateState<S> {
    slots: BTreeMap<Pair, PairEstimate<S>>,
}

impl<S: Scalar> DistanceEstimateState<S> {
    pub fn new(pairs: impl IntoIterator<Item = Pair>) -> Self {
        let empty = PairEstimate {
            count: 0,
            mean: S::zero(),
            latest: S::zero(),
        };
        Self {
            slots: pairs.into_iter().map(|p| (p, empty)).collect(),
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        self.slots.keys().copied()
    }

    pub fn count(&self, pair: Pair) -> Option<u64> {
        self.slots.get(&pair).map(|s| s.count)
    }

    /// Feeds sample number `t` (0-based) of `pair`:
    /// `d̄(t) = t/(t+1) d̄(t-1) + d̃(t)/(t+1)`, with `d̄(0) = d̃(0)`.
    pub fn update_running_average(&mut self, pair: Pair, sample: S, t: u64) -> Result<(), EstimationError> {
        let slot = self
            .slots
            .get_mut(&pair)
            .ok_or(EstimationError::UntrackedPair(pair))?;
        if t != slot.count {
            return Err(EstimationError::OutOfOrderSample {
                pair,
                expected: slot.count,
                got: t,
            });
        }
        if !sample.is_finite() {
            return Err(EstimationError::NonFiniteSample(pair));
        }
        if t == 0 {
            slot.mean = sample;
        } else {
            let n = S::lit((t + 1) as f64);
            slot.mean = slot.mean * (S::lit(t as f64) / n) + sample / n;
        }
        slot.latest = sample;
        slot.count += 1;
        Ok(())
    }

    /// Snapshot of the running means over every tracked pair, clamped at zero.
    pub fn current_estimates(&self) -> Result<DistanceSet<S>, EstimationError> {
        self.snapshot(|s| s.mean.max(S::zero()))
    }

    /// Snapshot of the most recent corrected sample of every tracked pair, clamped at zero.
    pub fn latest_samples(&self) -> Result<DistanceSet<S>, EstimationError> {
        self.snapshot(|s| s.latest.max(S::zero()))
    }

    /// Unclamped running mean of one pair.
    pub fn mean(&self, pair: Pair) -> Option<S> {
        self.slots.get(&pair).filter(|s| s.count > 0).map(|s| s.mean)
    }

    fn snapshot(&self, f: impl Fn(&PairEstimate<S>) -> S) -> Result<DistanceSet<S>, EstimationError> {
        self.slots
            .iter()
            .map(|(&p, s)| {
                if s.count == 0 {
                    Err(EstimationError::MissingPair(p))
                } else {
                    Ok((p, f(s)))
                }
            })
            .collect()
    }
}
