//! Distance-only barycentric coordinates against a Cartesian oracle.

use diland::geometry::{
    barycentric_coordinates, cayley_menger_sq_content, euclidean, hull_inclusion_test,
    SimplexDistances,
};
use proptest::prelude::*;

/// Solves `[v_1 - v_0, ..., v_m - v_0] λ' = p - v_0` by Gaussian elimination with
/// partial pivoting and returns `(1 - Σλ', λ')`. Written out here so the oracle shares
/// no code with the library.
fn cartesian_oracle(vertices: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|r| {
            let mut row: Vec<f64> = (1..=m).map(|c| vertices[c][r] - vertices[0][r]).collect();
            row.push(p[r] - vertices[0][r]);
            row
        })
        .collect();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let rest: Vec<f64> = (0..m).map(|r| a[r][m] / a[r][r]).collect();
    let mut out = vec![1.0 - rest.iter().sum::<f64>()];
    out.extend(rest);
    out
}

/// Query point first, then the vertices.
fn dists(p: &[f64], vertices: &[Vec<f64>]) -> SimplexDistances<f64> {
    let mut pts = vec![p.to_vec()];
    pts.extend(vertices.iter().cloned());
    SimplexDistances::from_points(&pts)
}

/// Content relative to the longest edge; keeps the oracle comparison away from slivers,
/// where both sides lose digits.
fn well_shaped(vertices: &[Vec<f64>]) -> bool {
    let n = vertices.len();
    let k = n - 1;
    let s = SimplexDistances::from_points(vertices);
    let vol = cayley_menger_sq_content(&s).max(0.0).sqrt();
    let max_edge = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| euclidean(&vertices[i], &vertices[j]))
        .fold(0.0, f64::max);
    vol / max_edge.powi(k as i32) > 0.02
}

fn convex_point(vertices: &[Vec<f64>], raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    let m = vertices[0].len();
    (0..m)
        .map(|j| vertices.iter().zip(raw).map(|(v, w)| v[j] * w / total).sum())
        .collect()
}

fn simplex(m: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (
        prop::collection::vec(prop::collection::vec(-10.0f64..10.0, m), m + 1),
        prop::collection::vec(0.01f64..1.0, m + 1),
    )
        .prop_filter("well shaped", |(v, _)| well_shaped(v))
}

fn check_against_oracle(vertices: &[Vec<f64>], weights: &[f64]) -> Result<(), TestCaseError> {
    let m = vertices.len() - 1;
    let p = convex_point(vertices, weights);
    let got = barycentric_coordinates(m, &dists(&p, vertices)).unwrap();
    let want = cartesian_oracle(vertices, &p);
    for (g, w) in got.coords.iter().zip(&want) {
        prop_assert!((g - w).abs() <= 1e-9, "got {:?} want {:?}", got.coords, want);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn triangle_matches_cartesian_solve((v, w) in simplex(2)) {
        check_against_oracle(&v, &w)?;
    }

    #[test]
    fn tetrahedron_matches_cartesian_solve((v, w) in simplex(3)) {
        check_against_oracle(&v, &w)?;
    }

    #[test]
    fn vertex_permutation_permutes_coordinates((v, w) in simplex(3), rot in 0usize..4) {
        let p = convex_point(&v, &w);
        let base = barycentric_coordinates(3, &dists(&p, &v)).unwrap().coords;
        let mut perm = v.clone();
        perm.rotate_left(rot);
        let got = barycentric_coordinates(3, &dists(&p, &perm)).unwrap().coords;
        for (i, g) in got.iter().enumerate() {
            prop_assert!((g - base[(i + rot) % 4]).abs() <= 1e-10);
        }
    }

    #[test]
    fn uniform_scaling_leaves_coordinates_unchanged(
        (v, w) in simplex(2),
        s in 0.001f64..1000.0,
    ) {
        let p = convex_point(&v, &w);
        let d = dists(&p, &v);
        let scaled = SimplexDistances::new(2, d.matrix().scale(s)).unwrap();
        let a = barycentric_coordinates(2, &d).unwrap().coords;
        let b = barycentric_coordinates(2, &scaled).unwrap().coords;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
        let c0 = cayley_menger_sq_content(&SimplexDistances::from_points(&v));
        let vs: Vec<Vec<f64>> = v.iter().map(|r| r.iter().map(|x| x * s).collect()).collect();
        let c1 = cayley_menger_sq_content(&SimplexDistances::from_points(&vs));
        prop_assert!((c1 - c0 * s.powi(4)).abs() <= 1e-9 * c1.abs());
    }

    #[test]
    fn hull_test_agrees_with_oracle_signs(
        (v, _) in simplex(2),
        p in prop::collection::vec(-12.0f64..12.0, 2),
    ) {
        let want = cartesian_oracle(&v, &p);
        // Skip points within rounding distance of an edge.
        prop_assume!(want.iter().all(|c| c.abs() > 1e-6));
        let inside = want.iter().all(|&c| c > 0.0);
        prop_assert_eq!(hull_inclusion_test(2, &dists(&p, &v)).unwrap(), inside);
    }

    #[test]
    fn triangle_content_matches_shoelace((v, _) in simplex(2)) {
        let area = 0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1])
            - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1])).abs();
        let sq = cayley_menger_sq_content(&SimplexDistances::from_points(&v));
        prop_assert!((sq - area * area).abs() <= 1e-9 * area * area);
    }
}

#[test]
fn reference_triangle_centroid() {
    let v = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![0.5, 3f64.sqrt() / 2.0],
    ];
    let c = barycentric_coordinates(2, &dists(&[0.5, 3f64.sqrt() / 6.0], &v)).unwrap();
    for x in c.coords {
        assert!((x - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn unit_tetrahedron_volume() {
    let v = vec![
        vec![0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ];
    let sq = cayley_menger_sq_content(&SimplexDistances::from_points(&v));
    assert!((sq - 1.0f64 / 36.0).abs() < 1e-14);
}
