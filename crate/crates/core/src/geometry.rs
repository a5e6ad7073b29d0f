//! Distance-only simplex geometry: Cayley-Menger squared contents, barycentric
//! coordinates and the convex hull inclusion test.
//!
//! Every routine here takes pairwise distances only. Positions never enter, which
//! is what lets a sensor compute its weights from ranging alone.

use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Relative feasibility tolerance on squared contents, scaled by `(max distance)^(2k)`.
pub const GEOM_REL_EPS: f64 = 1e-12;

/// Tolerance of the hull inclusion test; boundary points count as inside.
pub const HULL_EPS: f64 = 1e-9;

/// Rounding floor on a squared content, relative to `(max distance)^(2k)`. Square roots
/// of contents this small carry an absolute error of about `sqrt(ROUNDING_REL)`.
const ROUNDING_REL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("distance matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("expected {expected} points, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("distance matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("distance matrix has a nonzero diagonal at {0}")]
    NonzeroDiagonal(usize),
    #[error("distance ({0}, {1}) is negative or not finite")]
    InvalidDistance(usize, usize),
    #[error("base simplex is degenerate")]
    DegenerateSimplex,
    #[error("distances are metrically infeasible")]
    InfeasibleDistances,
}

/// Pairwise distances among the `k + 1` vertices of a simplex living in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexDistances<S> {
    dim: usize,
    d: Matrix<S>,
}

impl<S: Scalar> SimplexDistances<S> {
    /// Validates symmetry, zero diagonal and nonnegative finite entries.
    pub fn new(dim: usize, d: Matrix<S>) -> Result<Self, GeometryError> {
        let (rows, cols) = d.shape();
        if rows != cols || rows == 0 {
            return Err(GeometryError::NotSquare { rows, cols });
        }
        for i in 0..rows {
            if d[(i, i)] != S::zero() {
                return Err(GeometryError::NonzeroDiagonal(i));
            }
            for j in i + 1..rows {
                let v = d[(i, j)];
                if !v.is_finite() || v < S::zero() {
                    return Err(GeometryError::InvalidDistance(i, j));
                }
                if v != d[(j, i)] {
                    return Err(GeometryError::NotSymmetric(i, j));
                }
            }
        }
        Ok(Self { dim, d })
    }

    /// Distances between explicit points; used by simulators and oracles.
    pub fn from_points<P: AsRef<[S]>>(points: &[P]) -> Self {
        let dim = points.first().map_or(0, |p| p.as_ref().len());
        let d = Matrix::from_fn(points.len(), points.len(), |i, j| {
            if i == j {
                S::zero()
            } else {
                euclidean(points[i].as_ref(), points[j].as_ref())
            }
        });
        Self { dim, d }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points (`k + 1` for a `k`-simplex).
    pub fn len(&self) -> usize {
        self.d.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.d.rows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.d[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix<S> {
        &self.d
    }

    fn max_distance(&self) -> S {
        self.d.max_abs()
    }
}

pub fn euclidean<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<S>()
        .sqrt()
}

/// Barycentric coordinates of one point with respect to `m + 1` simplex vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricCoords<S> {
    pub coords: Vec<S>,
}

impl<S: Scalar> BarycentricCoords<S> {
    pub fn sum(&self) -> S {
        self.coords.iter().copied().sum()
    }
}

/// `(-1)^(k+1) / (2^k (k!)^2)`, the Cayley-Menger normalization for a `k`-simplex.
fn cm_factor<S: Scalar>(k: usize) -> S {
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
    S::lit(sign / (2f64.powi(k as i32) * fact * fact))
}

/// Squared content of the simplex spanned by the points `idx` of `d`.
fn sq_content_of<S: Scalar>(d: &Matrix<S>, idx: &[usize]) -> S {
    let n = idx.len();
    let k = n - 1;
    let cm = Matrix::from_fn(n + 1, n + 1, |r, c| match (r, c) {
        (0, 0) => S::zero(),
        (0, _) | (_, 0) => S::one(),
        (r, c) => {
            let v = d[(idx[r - 1], idx[c - 1])];
            v * v
        }
    });
    cm_factor::<S>(k) * cm.determinant()
}

/// Squared `k`-content of the simplex through the Cayley-Menger determinant.
///
/// Metrically inconsistent distances can give a negative value; the caller decides
/// what to do with it.
pub fn cayley_menger_sq_content<S: Scalar>(s: &SimplexDistances<S>) -> S {
    let idx: Vec<usize> = (0..s.len()).collect();
    sq_content_of(s.matrix(), &idx)
}

/// Feasibility tolerance for a squared `k`-content at distance scale `max_d`.
pub fn geom_eps<S: Scalar>(max_d: S, k: usize) -> S {
    S::lit(GEOM_REL_EPS) * max_d.powi(2 * k as i32)
}

/// Contents of the base simplex and of each simplex obtained by swapping one base
/// vertex for the query point, with the negative-clamp rule applied.
#[derive(Debug, Clone)]
struct ContentPartition<S> {
    base: S,
    parts: Vec<S>,
    max_d: S,
}

/// Index 0 of `dists` is the query point, indices `1..=m+1` the simplex vertices.
fn content_partition<S: Scalar>(
    m: usize,
    dists: &SimplexDistances<S>,
) -> Result<ContentPartition<S>, GeometryError> {
    if dists.len() != m + 2 {
        return Err(GeometryError::DimensionMismatch {
            expected: m + 2,
            found: dists.len(),
        });
    }
    let max_d = dists.max_distance();
    let eps = geom_eps(max_d, m);
    let d = dists.matrix();

    let base_idx: Vec<usize> = (1..=m + 1).collect();
    let base = sq_content_of(d, &base_idx);
    if base < -eps {
        return Err(GeometryError::InfeasibleDistances);
    }
    if base <= eps {
        return Err(GeometryError::DegenerateSimplex);
    }

    let mut idx = base_idx.clone();
    let mut parts = Vec::with_capacity(m + 1);
    for n in 0..=m {
        idx[n] = 0;
        let c = sq_content_of(d, &idx);
        idx[n] = base_idx[n];
        if c < -eps {
            return Err(GeometryError::InfeasibleDistances);
        }
        parts.push(c.max(S::zero()).sqrt());
    }
    Ok(ContentPartition {
        base: base.sqrt(),
        parts,
        max_d,
    })
}

/// Barycentric coordinates of point 0 of `dists` with respect to points `1..=m+1`.
///
/// The coordinate of vertex `n` is the content of the simplex with `n` replaced by the
/// query point, divided by the content of the base simplex. The result is renormalized
/// to sum to one, so the rows built from it stay stochastic even for noisy input.
pub fn barycentric_coordinates<S: Scalar>(
    m: usize,
    dists: &SimplexDistances<S>,
) -> Result<BarycentricCoords<S>, GeometryError> {
    let part = content_partition(m, dists)?;
    let total: S = part.parts.iter().copied().sum();
    if total <= S::zero() {
        return Err(GeometryError::InfeasibleDistances);
    }
    Ok(BarycentricCoords {
        coords: part.parts.iter().map(|&p| p / total).collect(),
    })
}

/// True iff point 0 of `dists` lies in the closed convex hull of points `1..=m+1`.
///
/// Realized as the content partition: the swapped-vertex contents add up to the base
/// content exactly when the point is inside (or on the boundary).
pub fn hull_inclusion_test<S: Scalar>(
    m: usize,
    dists: &SimplexDistances<S>,
) -> Result<bool, GeometryError> {
    let part = content_partition(m, dists)?;
    let total: S = part.parts.iter().copied().sum();
    let rounding = S::lit((m + 1) as f64 * ROUNDING_REL.sqrt()) * part.max_d.powi(m as i32);
    Ok((total - part.base).abs() <= S::lit(HULL_EPS) * part.base + rounding)
}
