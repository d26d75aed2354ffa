//! Convex decomposition of simple planar polygons: ear-clipping
//! triangulation, then greedy merging of neighbouring pieces whose union
//! stays convex.

use super::shape::ConvexShape;
use super::GeometryError;

type P2 = [f64; 2];

const COLLINEAR_EPS: f64 = 1e-14;

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Twice the signed area (positive for counter-clockwise order).
fn signed_area2(poly: &[P2]) -> f64 {
    (0..poly.len())
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum()
}

/// Shoelace area of a polygon (either orientation).
pub fn polygon_area(poly: &[P2]) -> f64 {
    0.5 * signed_area2(poly).abs()
}

fn scale_of(poly: &[P2]) -> f64 {
    poly.iter().flat_map(|p| p.iter()).fold(1.0f64, |m, v| m.max(v.abs()))
}

/// True when every turn of the closed chain is left or straight.
pub fn is_convex_ccw(poly: &[P2]) -> bool {
    let n = poly.len();
    let eps = COLLINEAR_EPS * scale_of(poly).powi(2);
    (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) >= -eps)
}

/// Drops repeated and collinear vertices; neither changes the enclosed area.
fn simplify(poly: &[P2]) -> Vec<P2> {
    let eps = COLLINEAR_EPS * scale_of(poly).powi(2);
    let mut out: Vec<P2> = poly.to_vec();
    loop {
        let n = out.len();
        if n < 3 {
            return out;
        }
        let drop = (0..n).find(|&i| {
            let prev = out[(i + n - 1) % n];
            let next = out[(i + 1) % n];
            out[i] == prev || cross(prev, out[i], next).abs() <= eps
        });
        match drop {
            Some(i) => {
                out.remove(i);
            }
            None => return out,
        }
    }
}

fn segments_intersect(p1: P2, p2: P2, q1: P2, q2: P2) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: P2, b: P2, p: P2, d: f64| {
        d == 0.0 && p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn is_simple(poly: &[P2]) -> bool {
    let n = poly.len();
    for i in 0..n {
        let (a1, a2) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 1)..n {
            // Skip edges sharing a vertex.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (b1, b2) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// Splits a simple polygon into convex pieces that tile it.
///
/// A polygon that is already convex comes back as a single piece. Vertex order
/// may be clockwise or counter-clockwise; pieces are counter-clockwise.
pub fn decompose_nonconvex(vertices: &[P2]) -> Result<Vec<ConvexShape>, GeometryError> {
    Ok(convex_partition(vertices)?
        .into_iter()
        .map(|piece| ConvexShape::polygon(&piece).expect("finite planar vertices"))
        .collect())
}

/// Vertex lists of the convex pieces produced by [`decompose_nonconvex`].
pub fn convex_partition(vertices: &[P2]) -> Result<Vec<Vec<P2>>, GeometryError> {
    if vertices.len() < 3 {
        return Err(GeometryError::InvalidPolygon("fewer than 3 vertices"));
    }
    if vertices.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let mut deduped: Vec<P2> = vertices.to_vec();
    deduped.dedup();
    while deduped.len() > 1 && deduped.first() == deduped.last() {
        deduped.pop();
    }
    if deduped.len() < 3 {
        return Err(GeometryError::InvalidPolygon("fewer than 3 distinct vertices"));
    }
    if !is_simple(&deduped) {
        return Err(GeometryError::InvalidPolygon("self-intersecting boundary"));
    }
    let mut poly = simplify(&deduped);
    if poly.len() < 3 {
        return Err(GeometryError::InvalidPolygon("zero area"));
    }
    if signed_area2(&poly) < 0.0 {
        poly.reverse();
    }
    if is_convex_ccw(&poly) {
        return Ok(vec![poly]);
    }
    let triangles = ear_clip(&poly)?;
    let pieces = greedy_merge(&poly, triangles);
    Ok(pieces
        .into_iter()
        .map(|idx| simplify(&idx.iter().map(|&i| poly[i]).collect::<Vec<_>>()))
        .collect())
}

fn ear_clip(poly: &[P2]) -> Result<Vec<Vec<usize>>, GeometryError> {
    let mut remaining: Vec<usize> = (0..poly.len()).collect();
    let mut triangles = Vec::with_capacity(poly.len() - 2);
    let eps = COLLINEAR_EPS * scale_of(poly).powi(2);

    while remaining.len() > 3 {
        let n = remaining.len();
        let ear = (0..n).find(|&i| {
            let a = poly[remaining[(i + n - 1) % n]];
            let b = poly[remaining[i]];
            let c = poly[remaining[(i + 1) % n]];
            if cross(a, b, c) <= eps {
                return false;
            }
            remaining.iter().all(|&k| {
                let p = poly[k];
                if p == a || p == b || p == c {
                    return true;
                }
                // Reject points inside or on the candidate triangle.
                !(cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0)
            })
        });
        let Some(i) = ear else {
            return Err(GeometryError::InvalidPolygon("no ear found (degenerate boundary)"));
        };
        triangles.push(vec![remaining[(i + n - 1) % n], remaining[i], remaining[(i + 1) % n]]);
        remaining.remove(i);
    }
    triangles.push(remaining);
    Ok(triangles)
}

/// Repeatedly fuses two pieces across a shared diagonal when the result is
/// convex.
fn greedy_merge(poly: &[P2], mut pieces: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    'search: loop {
        for a in 0..pieces.len() {
            for b in (a + 1)..pieces.len() {
                if let Some(merged) = splice(&pieces[a], &pieces[b]) {
                    let pts: Vec<P2> = merged.iter().map(|&i| poly[i]).collect();
                    if is_convex_ccw(&pts) {
                        pieces[a] = merged;
                        pieces.swap_remove(b);
                        continue 'search;
                    }
                }
            }
        }
        return pieces;
    }
}

/// Union of two CCW index cycles sharing exactly one edge, which appears as
/// `u → v` in the first and `v → u` in the second.
fn splice(p: &[usize], q: &[usize]) -> Option<Vec<usize>> {
    let (np, nq) = (p.len(), q.len());
    for i in 0..np {
        let (u, v) = (p[i], p[(i + 1) % np]);
        if let Some(j) = (0..nq).find(|&j| q[j] == v && q[(j + 1) % nq] == u) {
            // Walk p from v around to u, then q from u (exclusive) to v (exclusive).
            let mut out = Vec::with_capacity(np + nq - 2);
            for k in 0..np {
                out.push(p[(i + 1 + k) % np]);
            }
            for k in 2..nq {
                out.push(q[(j + k) % nq]);
            }
            return Some(out);
        }
    }
    None
}
