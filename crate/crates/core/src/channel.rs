//! Stochastic environment: distance measurement models (additive Gaussian, RSS,
//! TOA), Bernoulli link failures and additive communication noise.
//!
//! Samplers are pure functions of their inputs and the RNG state they are handed.
//! Draws are made in `f64` and converted to the working scalar.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::network::NodeId;
use crate::scalar::Scalar;

/// Distance samples never fall below this fraction of the true distance.
pub const DISTANCE_FLOOR_REL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid channel parameter: {0}")]
    InvalidParameter(String),
}

fn require(cond: bool, what: &str) -> Result<(), ChannelError> {
    if cond {
        Ok(())
    } else {
        Err(ChannelError::InvalidParameter(what.to_string()))
    }
}

fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Received-signal-strength ranging parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssParams<S> {
    /// Reference distance `Δ0`.
    pub delta0: S,
    /// Received power at the reference distance, dB.
    pub pi0: S,
    /// Path-loss exponent.
    pub np: S,
    /// Shadowing standard deviation, dB.
    pub shadow_sigma: S,
    /// Multiplicative bias `C` of the raw estimate.
    pub bias_c: S,
    /// Log-domain spread of the per-iteration estimate of `C`.
    pub c_est_sigma: S,
}

impl<S: Scalar> RssParams<S> {
    pub fn validate(&self) -> Result<(), ChannelError> {
        require(self.delta0 > S::zero(), "rss delta0 must be positive")?;
        require(self.np > S::zero(), "rss path-loss exponent must be positive")?;
        require(self.bias_c > S::zero(), "rss bias C must be positive")?;
        require(self.shadow_sigma >= S::zero(), "rss shadow_sigma must be >= 0")?;
        require(self.c_est_sigma >= S::zero(), "rss c_est_sigma must be >= 0")
    }
}

/// Time-of-arrival ranging parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToaParams<S> {
    /// Propagation velocity.
    pub nu_p: S,
    /// Mean delay bias `μ_T`.
    pub mu_t: S,
    /// Delay standard deviation.
    pub sigma_t: S,
    /// Standard deviation of the per-iteration estimate of `μ_T`.
    pub mu_est_sigma: S,
}

impl<S: Scalar> ToaParams<S> {
    pub fn validate(&self) -> Result<(), ChannelError> {
        require(self.nu_p > S::zero(), "toa propagation velocity must be positive")?;
        require(self.sigma_t >= S::zero(), "toa sigma_t must be >= 0")?;
        require(self.mu_est_sigma >= S::zero(), "toa mu_est_sigma must be >= 0")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkOverride<S> {
    pub sensor: NodeId,
    pub neighbor: NodeId,
    pub q: S,
}

/// Activation probabilities `q_ln` of the links `n -> l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkModel<S> {
    pub default_q: S,
    #[serde(default)]
    pub overrides: Vec<LinkOverride<S>>,
}

impl<S: Scalar> LinkModel<S> {
    pub fn uniform(q: S) -> Self {
        Self {
            default_q: q,
            overrides: Vec::new(),
        }
    }

    pub fn q(&self, sensor: NodeId, neighbor: NodeId) -> S {
        self.overrides
            .iter()
            .find(|o| o.sensor == sensor && o.neighbor == neighbor)
            .map_or(self.default_q, |o| o.q)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let ok = |q: S| q > S::zero() && q <= S::one();
        require(ok(self.default_q), "link probability q must be in (0, 1]")?;
        require(
            self.overrides.iter().all(|o| ok(o.q)),
            "link probability q must be in (0, 1]",
        )
    }
}

/// Zero-mean Gaussian additive noise on exchanged states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommNoiseModel<S> {
    pub sigma_v: S,
}

impl<S: Scalar> CommNoiseModel<S> {
    pub fn validate(&self) -> Result<(), ChannelError> {
        require(self.sigma_v >= S::zero(), "communication noise sigma must be >= 0")
    }
}

/// `d_true + w`, `w ~ N(0, variance_fraction * d_true)`, without the positive floor.
///
/// Short links under heavy noise give nonpositive values here. Averaging these raw
/// values keeps a running mean unbiased, which a floored sample would not.
pub fn gaussian_distance_raw<S: Scalar, R: Rng + ?Sized>(
    d_true: S,
    variance_fraction: S,
    rng: &mut R,
) -> S {
    let std = (variance_fraction * d_true).sqrt();
    d_true + std * S::lit(std_normal(rng))
}

/// [`gaussian_distance_raw`] floored at `DISTANCE_FLOOR_REL * d_true`.
pub fn measure_distance_gaussian<S: Scalar, R: Rng + ?Sized>(
    d_true: S,
    variance_fraction: S,
    rng: &mut R,
) -> S {
    gaussian_distance_raw(d_true, variance_fraction, rng).max(S::lit(DISTANCE_FLOOR_REL) * d_true)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssSample<S> {
    /// Raw distance estimate inverted from the received power.
    pub d_hat: S,
    /// Per-iteration estimate of the bias `C`.
    pub c_hat: S,
}

/// Simulates one received power reading and inverts it with the log-distance law.
///
/// The shadowing factor is a mean-one lognormal so `E[d_hat] = C d` holds exactly. The
/// bias estimate is `C` times an independent lognormal whose reciprocal has mean one,
/// which makes `d_hat / c_hat` unbiased.
pub fn measure_distance_rss<S: Scalar, R: Rng + ?Sized>(
    d_true: S,
    p: &RssParams<S>,
    rng: &mut R,
) -> RssSample<S> {
    let ten = S::lit(10.0);
    let s_ln = p.shadow_sigma.as_f64() * std::f64::consts::LN_10 / (10.0 * p.np.as_f64());
    let shadow = S::lit((s_ln * std_normal(rng) - 0.5 * s_ln * s_ln).exp());
    let rss = p.pi0 - ten * p.np * (p.bias_c * d_true * shadow / p.delta0).log10();
    let d_hat = p.delta0 * ten.powf((p.pi0 - rss) / (ten * p.np));

    let c_sigma = p.c_est_sigma.as_f64();
    let c_hat = p.bias_c * S::lit((c_sigma * std_normal(rng) + 0.5 * c_sigma * c_sigma).exp());
    RssSample { d_hat, c_hat }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToaSample<S> {
    /// Measured propagation delay.
    pub delay: S,
    /// Per-iteration estimate of the delay bias.
    pub mu_hat: S,
}

/// `T ~ N(d/ν + μ_T, σ_T²)` and an independent `μ̂_T ~ N(μ_T, mu_est_sigma²)`.
pub fn measure_distance_toa<S: Scalar, R: Rng + ?Sized>(
    d_true: S,
    p: &ToaParams<S>,
    rng: &mut R,
) -> ToaSample<S> {
    let delay = d_true / p.nu_p + p.mu_t + p.sigma_t * S::lit(std_normal(rng));
    let mu_hat = p.mu_t + p.mu_est_sigma * S::lit(std_normal(rng));
    ToaSample { delay, mu_hat }
}

/// Bernoulli link activation: `true` with probability `q`.
pub fn sample_link<S: Scalar, R: Rng + ?Sized>(q: S, rng: &mut R) -> bool {
    rng.random::<f64>() < q.as_f64()
}

/// `rows x cols` matrix of i.i.d. `N(0, sigma_v²)` draws.
pub fn sample_comm_noise<S: Scalar, R: Rng + ?Sized>(
    model: &CommNoiseModel<S>,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Matrix<S> {
    if model.sigma_v == S::zero() {
        return Matrix::zeros(rows, cols);
    }
    Matrix::from_fn(rows, cols, |_, _| model.sigma_v * S::lit(std_normal(rng)))
}

/// How inter-node distances are observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DistanceModel<S> {
    /// Noiseless ranging.
    Exact,
    /// Additive Gaussian noise with variance `variance_fraction * d`.
    Gaussian { variance_fraction: S },
    Rss(RssParams<S>),
    Toa(ToaParams<S>),
}

impl<S: Scalar> DistanceModel<S> {
    pub fn validate(&self) -> Result<(), ChannelError> {
        match self {
            DistanceModel::Exact => Ok(()),
            DistanceModel::Gaussian { variance_fraction } => require(
                *variance_fraction >= S::zero(),
                "gaussian variance_fraction must be >= 0",
            ),
            DistanceModel::Rss(p) => p.validate(),
            DistanceModel::Toa(p) => p.validate(),
        }
    }
}

/// Everything random about the environment a trial runs in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig<S> {
    pub distance: DistanceModel<S>,
    #[serde(default)]
    pub links: Option<LinkModel<S>>,
    #[serde(default)]
    pub comm_noise: Option<CommNoiseModel<S>>,
}

impl<S: Scalar> ChannelConfig<S> {
    pub fn noiseless() -> Self {
        Self {
            distance: DistanceModel::Exact,
            links: None,
            comm_noise: None,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        self.distance.validate()?;
        if let Some(l) = &self.links {
            l.validate()?;
        }
        if let Some(c) = &self.comm_noise {
            c.validate()?;
        }
        Ok(())
    }

    /// True when link failures or communication noise can perturb an exchange.
    pub fn has_exchange_randomness(&self) -> bool {
        let links = self
            .links
            .as_ref()
            .is_some_and(|l| l.default_q < S::one() || l.overrides.iter().any(|o| o.q < S::one()));
        let noise = self.comm_noise.is_some_and(|c| c.sigma_v > S::zero());
        links || noise
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    fn rss(shadow: f64, c_sigma: f64, c: f64) -> RssParams<f64> {
        RssParams {
            delta0: 1.0,
            pi0: -40.0,
            np: 3.0,
            shadow_sigma: shadow,
            bias_c: c,
            c_est_sigma: c_sigma,
        }
    }

    #[test]
    fn gaussian_without_noise_is_exact() {
        let mut rng = stream(1, Stream::Distance);
        assert_eq!(measure_distance_gaussian(0.7, 0.0, &mut rng), 0.7);
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = stream(2, Stream::Distance);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| measure_distance_gaussian(1.0, 0.1, &mut rng))
            .collect();
        let (mean, var) = mean_var(&xs);
        assert!((mean - 1.0).abs() <= 3.0 * (0.1f64 / 1e5).sqrt(), "mean {mean}");
        assert!((var - 0.1).abs() <= 0.01, "var {var}");
    }

    #[test]
    fn gaussian_is_floored() {
        let mut rng = stream(3, Stream::Distance);
        for _ in 0..10_000 {
            assert!(measure_distance_gaussian(0.01, 10.0, &mut rng) >= 0.01 * DISTANCE_FLOOR_REL);
        }
    }

    #[test]
    fn rss_noiseless_cases() {
        let mut rng = stream(4, Stream::Distance);
        let s = measure_distance_rss(1.0, &rss(0.0, 0.0, 1.2), &mut rng);
        assert!((s.d_hat - 1.2).abs() < 1e-12 && (s.c_hat - 1.2).abs() < 1e-12);
        let s = measure_distance_rss(3.5, &rss(0.0, 0.0, 1.0), &mut rng);
        assert!((s.d_hat - 3.5).abs() < 1e-12);
    }

    #[test]
    fn rss_mean_is_c_times_d() {
        let mut rng = stream(5, Stream::Distance);
        let p = rss(4.0, 0.1, 1.2);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| measure_distance_rss(2.0, &p, &mut rng).d_hat)
            .collect();
        let (mean, _) = mean_var(&xs);
        assert!((mean / 2.4 - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn toa_cases() {
        let mut rng = stream(6, Stream::Distance);
        let p = ToaParams {
            nu_p: 3e8f64,
            mu_t: 10.9e-9,
            sigma_t: 0.0,
            mu_est_sigma: 0.0,
        };
        let s = measure_distance_toa(3.0, &p, &mut rng);
        assert!((s.delay - 20.9e-9).abs() < 1e-20);
        assert!(((s.delay - s.mu_hat) * p.nu_p - 3.0).abs() < 1e-9);

        let p = ToaParams {
            sigma_t: 1e-9,
            ..p
        };
        let xs: Vec<f64> = (0..100_000)
            .map(|_| (measure_distance_toa(3.0, &p, &mut rng).delay - p.mu_t) * p.nu_p)
            .collect();
        let (mean, _) = mean_var(&xs);
        // Standard deviation of one sample is sigma_t * nu_p = 0.3.
        assert!((mean - 3.0).abs() <= 3.0 * 0.3 / 1e5f64.sqrt(), "mean {mean}");
    }

    #[test]
    fn link_rates() {
        let mut rng = stream(7, Stream::Links);
        assert!((0..1000).all(|_| sample_link(1.0, &mut rng)));
        for q in [0.9, 0.5] {
            let hits = (0..100_000).filter(|_| sample_link(q, &mut rng)).count();
            assert!((hits as f64 / 1e5 - q).abs() <= 0.01);
        }
    }

    #[test]
    fn comm_noise_moments() {
        let mut rng = stream(8, Stream::CommNoise);
        let zero = sample_comm_noise(&CommNoiseModel { sigma_v: 0.0 }, 4, 2, &mut rng);
        assert_eq!(zero, Matrix::zeros(4, 2));
        let m = CommNoiseModel { sigma_v: 1.0 };
        let big = sample_comm_noise(&m, 50_000, 2, &mut rng);
        let xs: Vec<f64> = big.iter().copied().collect();
        let (mean, var) = mean_var(&xs);
        assert!(mean.abs() <= 0.02 && (var - 1.0).abs() <= 0.05);
        let a = sample_comm_noise(&m, 3, 2, &mut rng);
        let b = sample_comm_noise(&m, 3, 2, &mut rng);
        assert_ne!(a, b);
    }

    #[test]
    fn validation() {
        assert!(LinkModel::uniform(0.0).validate().is_err());
        assert!(LinkModel::uniform(1.0).validate().is_ok());
        assert!(rss(1.0, 0.1, 0.0).validate().is_err());
        assert!(CommNoiseModel { sigma_v: -1.0 }.validate().is_err());
        let mut c = ChannelConfig::<f64>::noiseless();
        assert!(!c.has_exchange_randomness());
        c.links = Some(LinkModel::uniform(0.9));
        assert!(c.has_exchange_randomness());
    }
}
