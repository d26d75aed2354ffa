use brisk_core::geometry::{
    convex_partition, decompose_nonconvex, min_distance, polygon_area, separating_hyperplane, ConvexShape,
    GeometryError, Segment,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn p(x: f64, y: f64) -> DVector<f64> {
    DVector::from_vec(vec![x, y])
}

fn seg(a: [f64; 2], b: [f64; 2]) -> Segment {
    Segment::new(p(a[0], a[1]), p(b[0], b[1])).unwrap()
}

fn point_segment(x: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let ab = b - a;
    let s = ((x - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (a + ab * s - x).norm()
}

/// Brute force: distance from dense samples of one segment to every edge of
/// the polygon, and from the polygon's vertices to the segment.
fn sampled_distance(s: &Segment, poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let edges: Vec<(DVector<f64>, DVector<f64>)> = (0..n)
        .map(|i| (p(poly[i][0], poly[i][1]), p(poly[(i + 1) % n][0], poly[(i + 1) % n][1])))
        .collect();
    let along = (0..=4000).map(|i| s.point_at(i as f64 / 4000.0)).flat_map(|x| {
        edges
            .iter()
            .map(move |(a, b)| point_segment(&x, a, b))
            .collect::<Vec<_>>()
    });
    let corners = edges.iter().map(|(a, _)| point_segment(a, s.start(), s.end()));
    along.chain(corners).fold(f64::INFINITY, f64::min)
}

const HEXAGON: [[f64; 2]; 6] = [
    [0.5, 0.3],
    [0.7, 0.35],
    [0.8, 0.5],
    [0.7, 0.65],
    [0.5, 0.6],
    [0.45, 0.45],
];

#[test]
fn distance_matches_dense_sampling() {
    let shape = ConvexShape::polygon(&HEXAGON).unwrap();
    let cases = [
        ([0.0, 0.0], [1.0, 0.1]),
        ([0.1, 0.9], [0.9, 0.95]),
        ([0.2, 0.2], [0.3, 0.8]),
        ([1.0, 0.0], [0.95, 0.9]),
    ];
    for (a, b) in cases {
        let s = seg(a, b);
        let exact = min_distance(&s, &shape).unwrap().distance;
        let sampled = sampled_distance(&s, &HEXAGON);
        assert!(exact <= sampled + 1e-12, "{a:?} {b:?}: {exact} > {sampled}");
        assert!(sampled - exact < 1e-3, "{a:?} {b:?}: {exact} vs {sampled}");
    }
}

#[test]
fn crossing_segment_has_zero_clearance() {
    let shape = ConvexShape::polygon(&HEXAGON).unwrap();
    let err = min_distance(&seg([0.0, 0.5], [1.0, 0.5]), &shape).unwrap_err();
    assert!(matches!(err, GeometryError::ZeroClearance { .. }));
}

#[test]
fn plane_separates_segment_and_obstacle() {
    let shape = ConvexShape::polygon(&HEXAGON).unwrap();
    let s = seg([0.0, 0.0], [1.0, 0.1]);
    let h = separating_hyperplane(&s, &shape).unwrap();
    assert!((h.normal.norm() - 1.0).abs() < 1e-12);
    for v in HEXAGON {
        assert!(h.signed_value(&p(v[0], v[1])) >= -1e-12);
    }
    for x in [s.start(), s.end()] {
        assert!(h.margin(x) >= h.clearance - 1e-12);
    }
    assert!((h.clearance - min_distance(&s, &shape).unwrap().distance).abs() < 1e-12);
}

#[test]
fn ball_plane_is_tangent() {
    let ball = ConvexShape::ball(p(0.5, 0.5), 0.1).unwrap();
    let h = separating_hyperplane(&seg([0.0, 0.2], [1.0, 0.2]), &ball).unwrap();
    assert!((h.normal - p(0.0, 1.0)).norm() < 1e-9);
    assert!((h.offset - 0.4).abs() < 1e-9);
    assert!((h.clearance - 0.2).abs() < 1e-9);
}

const COMB: [[f64; 2]; 8] = [
    [0.0, 0.0],
    [1.0, 0.0],
    [1.0, 1.0],
    [0.8, 1.0],
    [0.8, 0.3],
    [0.2, 0.3],
    [0.2, 1.0],
    [0.0, 1.0],
];

#[test]
fn decomposition_tiles_the_polygon() {
    let pieces = convex_partition(&COMB).unwrap();
    assert!(pieces.len() >= 2);
    let total: f64 = pieces.iter().map(|q| polygon_area(q)).sum();
    assert!((total - polygon_area(&COMB)).abs() < 1e-12);
    let shapes = decompose_nonconvex(&COMB).unwrap();
    // Every interior sample lies in exactly one piece interior or on a shared edge.
    let inside = |x: f64, y: f64| shapes.iter().any(|s| s.contains(&p(x, y)));
    assert!(inside(0.1, 0.9) && inside(0.9, 0.9) && inside(0.5, 0.1));
    assert!(!inside(0.5, 0.6));
}

fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

proptest! {
    #[test]
    fn distance_is_invariant_under_rigid_motion(
        theta in 0.0..std::f64::consts::TAU,
        tx in -5.0..5.0f64,
        ty in -5.0..5.0f64,
        ax in -1.0..0.3f64,
        ay in -1.0..2.0f64,
        bx in -1.0..0.3f64,
        by in -1.0..2.0f64,
    ) {
        prop_assume!((ax - bx).hypot(ay - by) > 1e-3);
        let shape = ConvexShape::polygon(&HEXAGON).unwrap();
        let s = seg([ax, ay], [bx, by]);
        let (r, t) = (rotation(theta), p(tx, ty));
        let moved = Segment::new(&r * s.start() + &t, &r * s.end() + &t).unwrap();
        let d0 = min_distance(&s, &shape).unwrap().distance;
        let d1 = min_distance(&moved, &shape.transformed(&r, &t)).unwrap().distance;
        prop_assert!((d0 - d1).abs() < 1e-9);
    }

    #[test]
    fn partition_preserves_area_of_star_polygons(
        radii in proptest::collection::vec(0.3..1.0f64, 5..12),
    ) {
        let n = radii.len();
        let poly: Vec<[f64; 2]> = radii
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let pieces = convex_partition(&poly).unwrap();
        let total: f64 = pieces.iter().map(|q| polygon_area(q)).sum();
        prop_assert!((total - polygon_area(&poly)).abs() < 1e-10);
    }
}
