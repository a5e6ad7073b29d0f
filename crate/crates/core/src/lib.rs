//! Distance-only distributed sensor localization.
//!
//! Sensors inside the convex hull of `m + 1` anchors learn their coordinates from
//! inter-node distances alone. Each sensor expresses itself in barycentric
//! coordinates over a triangulation set of neighbors (computed from Cayley-Menger
//! determinants), and the resulting linear system is solved by local iterations:
//!
//! * DILOC for exact distances,
//! * DLRE, which uses the current noisy sample and converges to a biased point,
//! * DILAND, which feeds running-average distance estimates into a decreasing-weight
//!   update and converges to the exact locations under noisy ranging, link failures
//!   and communication noise.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases
//! below fix the common `f64` case.

pub mod algorithms;
pub mod channel;
pub mod estimation;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod scalar;
pub mod trial;

pub use algorithms::{AlgorithmError, AlgorithmState, Exchange, WeightSequence};
pub use channel::{ChannelConfig, CommNoiseModel, DistanceModel, LinkModel, RssParams, ToaParams};
pub use estimation::DistanceEstimateState;
pub use geometry::{BarycentricCoords, GeometryError, SimplexDistances};
pub use linalg::Matrix;
pub use metrics::{Trajectory, Verdict};
pub use network::{DistanceSet, Network, NetworkError, NodeId, Pair, SystemMatrices};
pub use scalar::Scalar;
pub use trial::{run_trial, AlgorithmKind, TrialError, TrialSpec};

pub type Matrix64 = Matrix<f64>;
pub type Network64 = Network<f64>;
pub type SystemMatrices64 = SystemMatrices<f64>;
pub type ChannelConfig64 = ChannelConfig<f64>;
pub type WeightSequence64 = WeightSequence<f64>;
pub type TrialSpec64 = TrialSpec<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type AlgorithmState64 = AlgorithmState<f64>;
