//! Node sets, random deployments, triangulation discovery and assembly of the
//! barycentric system matrices `P` (sensor-sensor) and `B` (sensor-anchor).
//!
//! Node ids are dense: anchors take `0..=m`, sensors follow in order. Ground-truth
//! sensor positions are kept in [`Network`] for the simulator and for error metrics;
//! the iterative algorithms only ever see distances and anchor positions.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    barycentric_coordinates, euclidean, hull_inclusion_test, GeometryError, SimplexDistances,
};
use crate::linalg::{spectral_radius_nonneg, Matrix};
use crate::rng::{stream, SimRng, Stream};
use crate::scalar::Scalar;

/// Redraws of a sensor position before deployment gives up on it.
pub const DEPLOYMENT_RETRIES: usize = 50;

/// Power-iteration budget for [`spectral_radius_estimate`].
pub const SPECTRAL_MAX_ITER: usize = 500;
pub const SPECTRAL_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unordered node pair, stored with the smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair(NodeId, NodeId);

impl Pair {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        assert_ne!(a, b, "a pair needs two distinct nodes");
        if a < b {
            Pair(a, b)
        } else {
            Pair(b, a)
        }
    }

    pub fn first(&self) -> NodeId {
        self.0
    }

    pub fn second(&self) -> NodeId {
        self.1
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("invalid deployment parameter: {0}")]
    InvalidParameter(String),
    #[error("no valid triangulation set for sensor {0}")]
    TriangulationFailed(NodeId),
    #[error("anchor {0} does not appear in any triangulation set")]
    AnchorUnused(NodeId),
    #[error("anchor {0} has an all-zero column in B")]
    AnchorUnreachable(NodeId),
    #[error("sensor {sensor}: {source}")]
    Geometry {
        sensor: NodeId,
        #[source]
        source: GeometryError,
    },
    #[error("distance for pair ({0}, {1}) is missing")]
    MissingDistance(NodeId, NodeId),
    #[error("I - P is singular")]
    SingularSystem,
    #[error("invalid network: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node<S> {
    pub id: NodeId,
    pub position: Vec<S>,
}

/// Anchors, sensors, communication radius and one triangulation set per sensor.
///
/// `triangulation[i]` is the sorted set of `m + 1` node ids enclosing `sensors[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network<S> {
    pub dim: usize,
    pub comm_radius: S,
    pub anchors: Vec<Node<S>>,
    pub sensors: Vec<Node<S>>,
    pub triangulation: Vec<Vec<NodeId>>,
}

impl<S: Scalar> Network<S> {
    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn num_anchors(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_anchor(&self, id: NodeId) -> bool {
        id.0 < self.anchors.len()
    }

    pub fn anchor_index(&self, id: NodeId) -> Option<usize> {
        self.is_anchor(id).then_some(id.0)
    }

    pub fn sensor_index(&self, id: NodeId) -> Option<usize> {
        let i = id.0.checked_sub(self.anchors.len())?;
        (i < self.sensors.len()).then_some(i)
    }

    pub fn sensor_id(&self, index: usize) -> NodeId {
        NodeId(self.anchors.len() + index)
    }

    pub fn position(&self, id: NodeId) -> &[S] {
        match self.sensor_index(id) {
            Some(i) => &self.sensors[i].position,
            None => &self.anchors[id.0].position,
        }
    }

    /// `(m + 1) x m` anchor position matrix `U`.
    pub fn anchor_matrix(&self) -> Matrix<S> {
        let rows: Vec<&[S]> = self.anchors.iter().map(|a| a.position.as_slice()).collect();
        Matrix::from_rows(&rows)
    }

    /// `M x m` ground-truth sensor positions. For the simulator and error metrics only.
    pub fn ground_truth(&self) -> Matrix<S> {
        let rows: Vec<&[S]> = self.sensors.iter().map(|s| s.position.as_slice()).collect();
        Matrix::from_rows(&rows)
    }

    /// True distance between two nodes. For the simulator only.
    pub fn true_distance(&self, a: NodeId, b: NodeId) -> S {
        euclidean(self.position(a), self.position(b))
    }

    /// The set `{l} ∪ Θ_l` for sensor index `i`, with `l` first.
    pub fn local_set(&self, i: usize) -> Vec<NodeId> {
        let mut set = Vec::with_capacity(self.dim + 2);
        set.push(self.sensor_id(i));
        set.extend_from_slice(&self.triangulation[i]);
        set
    }

    /// Every pair whose distance some sensor needs, sorted and deduplicated.
    pub fn required_pairs(&self) -> Vec<Pair> {
        let mut pairs: Vec<Pair> = (0..self.sensors.len())
            .flat_map(|i| {
                let set = self.local_set(i);
                let mut local = Vec::new();
                for a in 0..set.len() {
                    for b in a + 1..set.len() {
                        local.push(Pair::new(set[a], set[b]));
                    }
                }
                local
            })
            .collect();
        pairs.sort();
        pairs.dedup();
        pairs
    }

    pub fn exact_distances(&self) -> DistanceSet<S> {
        self.required_pairs()
            .into_iter()
            .map(|p| (p, self.true_distance(p.first(), p.second())))
            .collect()
    }

    /// Largest distance between two anchors, which is the diameter of the anchor hull.
    pub fn hull_diameter(&self) -> S {
        let mut d = S::zero();
        for a in &self.anchors {
            for b in &self.anchors {
                d = d.max(euclidean(&a.position, &b.position));
            }
        }
        d
    }

    /// Checks the structural assumptions: anchors affinely independent, sensors inside
    /// the anchor hull, each triangulation set encloses its sensor within radio range,
    /// and every anchor is used by some sensor.
    pub fn validate(&self) -> Result<(), NetworkError> {
        let m = self.dim;
        if self.anchors.len() != m + 1 {
            return Err(NetworkError::Invalid(format!(
                "expected {} anchors, found {}",
                m + 1,
                self.anchors.len()
            )));
        }
        for (i, a) in self.anchors.iter().enumerate() {
            if a.id != NodeId(i) || a.position.len() != m {
                return Err(NetworkError::Invalid(format!("malformed anchor {i}")));
            }
        }
        let anchor_dists = SimplexDistances::from_points(
            &self.anchors.iter().map(|a| a.position.clone()).collect::<Vec<_>>(),
        );
        let content = crate::geometry::cayley_menger_sq_content(&anchor_dists);
        if content <= crate::geometry::geom_eps(self.hull_diameter(), m) {
            return Err(NetworkError::Invalid("anchors lie on a hyperplane".into()));
        }
        if self.triangulation.len() != self.sensors.len() {
            return Err(NetworkError::Invalid("one triangulation set per sensor".into()));
        }
        let anchor_ids: Vec<NodeId> = self.anchors.iter().map(|a| a.id).collect();
        let mut used = vec![false; m + 1];
        for (i, s) in self.sensors.iter().enumerate() {
            let id = self.sensor_id(i);
            if s.id != id || s.position.len() != m {
                return Err(NetworkError::Invalid(format!("malformed sensor {i}")));
            }
            let in_hull = hull_inclusion_test(m, &self.distances_among(id, &anchor_ids))
                .map_err(|source| NetworkError::Geometry { sensor: id, source })?;
            if !in_hull {
                return Err(NetworkError::Invalid(format!(
                    "sensor {id} lies outside the anchor hull"
                )));
            }
            let theta = &self.triangulation[i];
            if theta.len() != m + 1 || theta.contains(&id) || theta.windows(2).any(|w| w[0] >= w[1])
            {
                return Err(NetworkError::Invalid(format!(
                    "triangulation set of sensor {id} is malformed"
                )));
            }
            for &n in theta {
                if n.0 >= self.anchors.len() + self.sensors.len() {
                    return Err(NetworkError::Invalid(format!("unknown node {n}")));
                }
                if self.true_distance(id, n) > self.comm_radius {
                    return Err(NetworkError::Invalid(format!(
                        "node {n} is out of range of sensor {id}"
                    )));
                }
                if let Some(k) = self.anchor_index(n) {
                    used[k] = true;
                }
            }
            let encloses = hull_inclusion_test(m, &self.distances_among(id, theta))
                .map_err(|source| NetworkError::Geometry { sensor: id, source })?;
            if !encloses {
                return Err(NetworkError::TriangulationFailed(id));
            }
        }
        if let Some(k) = used.iter().position(|u| !u) {
            return Err(NetworkError::AnchorUnused(NodeId(k)));
        }
        Ok(())
    }

    fn distances_among(&self, l: NodeId, set: &[NodeId]) -> SimplexDistances<S> {
        let mut pts = vec![self.position(l).to_vec()];
        pts.extend(set.iter().map(|&n| self.position(n).to_vec()));
        SimplexDistances::from_points(&pts)
    }
}

/// Distances keyed by unordered node pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistanceSet<S> {
    values: BTreeMap<Pair, S>,
}

impl<S: Scalar> DistanceSet<S> {
    pub fn new() -> Self {
        Self {
            values: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, pair: Pair, d: S) {
        self.values.insert(pair, d);
    }

    pub fn get(&self, a: NodeId, b: NodeId) -> Option<S> {
        if a == b {
            return Some(S::zero());
        }
        self.values.get(&Pair::new(a, b)).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Pair, S)> + '_ {
        self.values.iter().map(|(&p, &d)| (p, d))
    }

    /// Distance matrix among `nodes`, in the given order.
    pub fn simplex(&self, dim: usize, nodes: &[NodeId]) -> Result<SimplexDistances<S>, NetworkError> {
        let n = nodes.len();
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = self
                    .get(nodes[i], nodes[j])
                    .ok_or(NetworkError::MissingDistance(nodes[i], nodes[j]))?;
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        SimplexDistances::new(dim, d).map_err(|source| NetworkError::Geometry {
            sensor: nodes[0],
            source,
        })
    }
}

impl<S> FromIterator<(Pair, S)> for DistanceSet<S> {
    fn from_iter<I: IntoIterator<Item = (Pair, S)>>(iter: I) -> Self {
        Self {
            values: iter.into_iter().collect(),
        }
    }
}

/// Vertices of the reference anchor simplex: regular for `m <= 3`, otherwise the
/// origin plus the unit vectors.
pub fn reference_simplex<S: Scalar>(m: usize) -> Vec<Vec<S>> {
    let rows: Vec<Vec<f64>> = match m {
        1 => vec![vec![0.0], vec![1.0]],
        2 => vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]],
        3 => vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.5, 3f64.sqrt() / 2.0, 0.0],
            vec![0.5, 3f64.sqrt() / 6.0, (2.0f64 / 3.0).sqrt()],
        ],
        _ => (0..=m)
            .map(|k| (0..m).map(|j| if k == j + 1 { 1.0 } else { 0.0 }).collect())
            .collect(),
    };
    rows.into_iter()
        .map(|r| r.into_iter().map(S::lit).collect())
        .collect()
}

/// Uniform sample inside the simplex with the given vertices (flat Dirichlet weights).
pub fn sample_in_simplex<S: Scalar, R: Rng + ?Sized>(vertices: &[Vec<S>], rng: &mut R) -> Vec<S> {
    let weights: Vec<f64> = (0..vertices.len())
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = weights.iter().sum();
    let m = vertices[0].len();
    (0..m)
        .map(|j| {
            vertices
                .iter()
                .zip(&weights)
                .map(|(v, &w)| v[j] * S::lit(w / total))
                .sum()
        })
        .collect()
}

/// First `(m + 1)`-subset of `candidates` (lexicographic over sorted ids) whose convex
/// hull contains `l`.
///
/// `dist` must answer every pair among `{l} ∪ candidates`; subsets with missing,
/// degenerate or infeasible distances are skipped.
pub fn find_triangulation<S: Scalar>(
    m: usize,
    l: NodeId,
    candidates: &[NodeId],
    dist: impl Fn(NodeId, NodeId) -> Option<S>,
) -> Option<Vec<NodeId>> {
    let mut cands: Vec<NodeId> = candidates.iter().copied().filter(|&c| c != l).collect();
    cands.sort();
    cands.dedup();
    let k = m + 1;
    if cands.len() < k {
        return None;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let subset: Vec<NodeId> = idx.iter().map(|&i| cands[i]).collect();
        if encloses(m, l, &subset, &dist) {
            return Some(subset);
        }
        // Advance to the next combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if idx[i] != i + cands.len() - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn encloses<S: Scalar>(
    m: usize,
    l: NodeId,
    subset: &[NodeId],
    dist: &impl Fn(NodeId, NodeId) -> Option<S>,
) -> bool {
    let mut nodes = vec![l];
    nodes.extend_from_slice(subset);
    let n = nodes.len();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let Some(v) = dist(nodes[i], nodes[j]) else {
                return false;
            };
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    SimplexDistances::new(m, d)
        .ok()
        .and_then(|s| hull_inclusion_test(m, &s).ok())
        .unwrap_or(false)
}

/// Random deployment: anchors on the reference simplex, sensors uniform inside it,
/// and one triangulation set per sensor. Deterministic in `seed`.
///
/// A sensor without a triangulation set is redrawn, at most [`DEPLOYMENT_RETRIES`]
/// times, before [`NetworkError::TriangulationFailed`] is returned.
pub fn generate_deployment<S: Scalar>(
    m: usize,
    n_sensors: usize,
    comm_radius: S,
    seed: u64,
) -> Result<Network<S>, NetworkError> {
    generate_scaled_deployment(m, n_sensors, S::one(), comm_radius, seed)
}

/// [`generate_deployment`] with the reference simplex multiplied by `scale`.
///
/// Noise models with absolute units (a distance variance proportional to `d`, a fixed
/// communication noise level) behave very differently on a unit-size network than on
/// one spanning tens of length units, so the deployment size is a parameter.
pub fn generate_scaled_deployment<S: Scalar>(
    m: usize,
    n_sensors: usize,
    scale: S,
    comm_radius: S,
    seed: u64,
) -> Result<Network<S>, NetworkError> {
    if !(scale > S::zero()) || !scale.is_finite() {
        return Err(NetworkError::InvalidParameter("scale must be positive".into()));
    }
    if m == 0 {
        return Err(NetworkError::InvalidParameter("dimension must be positive".into()));
    }
    if n_sensors == 0 {
        return Err(NetworkError::InvalidParameter("need at least one sensor".into()));
    }
    if !(comm_radius > S::zero()) || !comm_radius.is_finite() {
        return Err(NetworkError::InvalidParameter(
            "communication radius must be positive".into(),
        ));
    }
    let mut rng: SimRng = stream(seed, Stream::Deployment);
    let vertices: Vec<Vec<S>> = reference_simplex::<S>(m)
        .into_iter()
        .map(|v| v.into_iter().map(|c| c * scale).collect())
        .collect();
    let anchors: Vec<Node<S>> = vertices
        .iter()
        .enumerate()
        .map(|(k, v)| Node {
            id: NodeId(k),
            position: v.clone(),
        })
        .collect();
    let mut positions: Vec<Vec<S>> = (0..n_sensors)
        .map(|_| sample_in_simplex(&vertices, &mut rng))
        .collect();
    let mut retries = vec![0usize; n_sensors];

    let triangulation = loop {
        let all: Vec<&[S]> = vertices
            .iter()
            .map(|v| v.as_slice())
            .chain(positions.iter().map(|p| p.as_slice()))
            .collect();
        let dist = |a: NodeId, b: NodeId| Some(euclidean(all[a.0], all[b.0]));
        let mut sets = Vec::with_capacity(n_sensors);
        let mut failed = Vec::new();
        for i in 0..n_sensors {
            let l = NodeId(m + 1 + i);
            let candidates: Vec<NodeId> = (0..all.len())
                .map(NodeId)
                .filter(|&n| n != l && euclidean(all[l.0], all[n.0]) <= comm_radius)
                .collect();
            match find_triangulation(m, l, &candidates, dist) {
                Some(set) => sets.push(set),
                None => {
                    failed.push(i);
                    sets.push(Vec::new());
                }
            }
        }
        if failed.is_empty() {
            break sets;
        }
        for i in failed {
            retries[i] += 1;
            if retries[i] > DEPLOYMENT_RETRIES {
                return Err(NetworkError::TriangulationFailed(NodeId(m + 1 + i)));
            }
            positions[i] = sample_in_simplex(&vertices, &mut rng);
        }
    };

    let sensors = positions
        .into_iter()
        .enumerate()
        .map(|(i, position)| Node {
            id: NodeId(m + 1 + i),
            position,
        })
        .collect();
    let net = Network {
        dim: m,
        comm_radius,
        anchors,
        sensors,
        triangulation,
    };
    let mut used = vec![false; m + 1];
    for set in &net.triangulation {
        for &n in set {
            if let Some(k) = net.anchor_index(n) {
                used[k] = true;
            }
        }
    }
    if let Some(k) = used.iter().position(|u| !u) {
        return Err(NetworkError::AnchorUnused(NodeId(k)));
    }
    Ok(net)
}

/// Sensor-sensor matrix `P` (`M x M`) and sensor-anchor matrix `B` (`M x (m+1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices<S> {
    pub p: Matrix<S>,
    pub b: Matrix<S>,
}

impl<S: Scalar> SystemMatrices<S> {
    pub fn zeros(num_sensors: usize, num_anchors: usize) -> Self {
        Self {
            p: Matrix::zeros(num_sensors, num_sensors),
            b: Matrix::zeros(num_sensors, num_anchors),
        }
    }

    pub fn num_sensors(&self) -> usize {
        self.p.rows()
    }

    /// Overwrites row `i` with barycentric weights over `Θ_i` (in the set's order).
    pub fn set_row(&mut self, net: &Network<S>, i: usize, coords: &[S]) {
        self.p.row_mut(i).iter_mut().for_each(|v| *v = S::zero());
        self.b.row_mut(i).iter_mut().for_each(|v| *v = S::zero());
        for (&n, &c) in net.triangulation[i].iter().zip(coords) {
            match net.anchor_index(n) {
                Some(k) => self.b[(i, k)] = c,
                None => self.p[(i, net.sensor_index(n).expect("node id in range"))] = c,
            }
        }
    }

    /// Sum of row `i` of `[P | B]`.
    pub fn row_sum(&self, i: usize) -> S {
        self.p.row(i).iter().chain(self.b.row(i)).copied().sum()
    }
}

/// Barycentric weights of sensor `i` over its triangulation set, from `dists`.
pub fn assemble_row<S: Scalar>(
    net: &Network<S>,
    i: usize,
    dists: &DistanceSet<S>,
) -> Result<Vec<S>, NetworkError> {
    let sensor = net.sensor_id(i);
    let simplex = dists.simplex(net.dim, &net.local_set(i))?;
    barycentric_coordinates(net.dim, &simplex)
        .map(|c| c.coords)
        .map_err(|source| NetworkError::Geometry { sensor, source })
}

/// Builds `P` and `B` from a distance set covering every `D_l`.
///
/// Fails on the first sensor whose distances are infeasible, and when some anchor
/// ends up with an all-zero column in `B`.
pub fn assemble_system<S: Scalar>(
    net: &Network<S>,
    dists: &DistanceSet<S>,
) -> Result<SystemMatrices<S>, NetworkError> {
    let mut sys = SystemMatrices::zeros(net.num_sensors(), net.num_anchors());
    for i in 0..net.num_sensors() {
        let coords = assemble_row(net, i, dists)?;
        sys.set_row(net, i, &coords);
    }
    for k in 0..net.num_anchors() {
        if sys.b.column(k).iter().all(|&v| v == S::zero()) {
            return Err(NetworkError::AnchorUnreachable(NodeId(k)));
        }
    }
    Ok(sys)
}

/// The fixed point `X* = (I - P)^-1 B U` by direct solve.
pub fn exact_locations<S: Scalar>(
    sys: &SystemMatrices<S>,
    anchors: &Matrix<S>,
) -> Result<Matrix<S>, NetworkError> {
    let n = sys.num_sensors();
    let lhs = Matrix::identity(n).sub(&sys.p);
    let rhs = sys.b.mul(anchors);
    let x = lhs.solve(&rhs).ok_or(NetworkError::SingularSystem)?;
    if !x.is_finite() {
        return Err(NetworkError::SingularSystem);
    }
    Ok(x)
}

/// Power-iteration estimate of `rho(P)`; guards the `rho(P) < 1` precondition.
pub fn spectral_radius_estimate<S: Scalar>(p: &Matrix<S>) -> S {
    spectral_radius_nonneg(p, SPECTRAL_MAX_ITER, S::lit(SPECTRAL_REL_TOL))
}
