//! Segment-to-obstacle distance.
//!
//! Polytopes go through a GJK-style support iteration on the Minkowski
//! difference `obstacle − segment`, whose vertices are the pairwise
//! differences of obstacle vertices and segment endpoints. Each iteration
//! queries the support point in the direction of the current iterate and then
//! re-solves the affine minimum-norm problem on the active simplex (Wolfe's
//! minor cycle), which keeps the barycentric weights and therefore the two
//! witness points. Balls are handled in closed form.

use nalgebra::{DMatrix, DVector};

use super::shape::ConvexShape;
use super::{GeometryError, Segment, ZERO_CLEARANCE};

const MAX_MAJOR_ITERATIONS: usize = 512;
const WEIGHT_EPS: f64 = 1e-14;

/// Closest pair between a segment and a bounded convex obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosestPoints {
    pub distance: f64,
    /// Witness on the obstacle.
    pub on_obstacle: DVector<f64>,
    /// Witness on the segment.
    pub on_segment: DVector<f64>,
}

/// Minimum distance between `seg` and a bounded convex obstacle.
///
/// Returns [`GeometryError::ZeroClearance`] when the distance is at most
/// `1e-9` (contact or penetration); no separating hyperplane exists then.
pub fn min_distance(seg: &Segment, obs: &ConvexShape) -> Result<ClosestPoints, GeometryError> {
    let closest = closest_points(seg, obs)?;
    if closest.distance <= ZERO_CLEARANCE {
        return Err(GeometryError::ZeroClearance {
            distance: closest.distance,
        });
    }
    Ok(closest)
}

/// Like [`min_distance`] but reports contact as a zero-distance result.
pub fn closest_points(seg: &Segment, obs: &ConvexShape) -> Result<ClosestPoints, GeometryError> {
    if seg.dim() != obs.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: seg.dim(),
            found: obs.dim(),
        });
    }
    match obs {
        ConvexShape::Ball(b) => {
            let on_segment = seg.closest_point_to(&b.center);
            let offset = &on_segment - &b.center;
            let center_gap = offset.norm();
            if center_gap <= b.radius {
                return Ok(ClosestPoints {
                    distance: 0.0,
                    on_obstacle: on_segment.clone(),
                    on_segment,
                });
            }
            let on_obstacle = &b.center + offset * (b.radius / center_gap);
            Ok(ClosestPoints {
                distance: center_gap - b.radius,
                on_obstacle,
                on_segment,
            })
        }
        ConvexShape::Polytope(p) => {
            let ends = [seg.start(), seg.end()];
            let verts = p.vertices();
            let diffs: Vec<DVector<f64>> = verts.iter().flat_map(|v| ends.iter().map(move |e| v - *e)).collect();
            let (point, weights) = min_norm_point(&diffs);
            let dim = seg.dim();
            let mut on_obstacle = DVector::zeros(dim);
            let mut on_segment = DVector::zeros(dim);
            for (idx, w) in weights {
                on_obstacle += &verts[idx / 2] * w;
                on_segment += ends[idx % 2] * w;
            }
            Ok(ClosestPoints {
                distance: point.norm(),
                on_obstacle,
                on_segment,
            })
        }
        ConvexShape::Halfspace(_) => Err(GeometryError::Unbounded),
    }
}

/// Euclidean distance from `p` to the convex hull of `vertices`.
pub(crate) fn point_to_hull_distance(p: &DVector<f64>, vertices: &[DVector<f64>]) -> f64 {
    let diffs: Vec<DVector<f64>> = vertices.iter().map(|v| v - p).collect();
    min_norm_point(&diffs).0.norm()
}

/// Minimum-norm point of `conv(points)` with its active barycentric weights.
pub(crate) fn min_norm_point(points: &[DVector<f64>]) -> (DVector<f64>, Vec<(usize, f64)>) {
    let scale = points.iter().map(|p| p.norm_squared()).fold(0.0, f64::max);
    let start = (0..points.len())
        .min_by(|&a, &b| points[a].norm_squared().total_cmp(&points[b].norm_squared()))
        .expect("non-empty point set");

    let mut active: Vec<usize> = vec![start];
    let mut weights: Vec<f64> = vec![1.0];
    let mut x = points[start].clone();

    for _ in 0..MAX_MAJOR_ITERATIONS {
        let xx = x.norm_squared();
        if xx <= 1e-300 {
            break;
        }
        // Support of conv(points) in direction -x.
        let (j, xp) = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, x.dot(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if xx - xp <= 1e-15 * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        weights.push(0.0);

        loop {
            let alpha = affine_min_norm(points, &active);
            if alpha.iter().all(|&a| a > WEIGHT_EPS) {
                weights = alpha;
                break;
            }
            // Step from the current weights towards alpha until the first
            // weight hits zero, then drop every zero weight.
            let mut theta = 1.0f64;
            for (w, a) in weights.iter().zip(&alpha) {
                if *a <= WEIGHT_EPS && w - a > 0.0 {
                    theta = theta.min(w / (w - a));
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w = theta * a + (1.0 - theta) * *w;
            }
            let mut keep = 0;
            for i in 0..active.len() {
                if weights[i] > WEIGHT_EPS {
                    active[keep] = active[i];
                    weights[keep] = weights[i];
                    keep += 1;
                }
            }
            if keep == 0 {
                // Numerical collapse: restart from the best vertex.
                active.truncate(1);
                weights.truncate(1);
                weights[0] = 1.0;
                break;
            }
            active.truncate(keep);
            weights.truncate(keep);
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            if active.len() == 1 {
                break;
            }
        }

        x = combine(points, &active, &weights);
    }

    (x, active.into_iter().zip(weights).collect())
}

fn combine(points: &[DVector<f64>], active: &[usize], weights: &[f64]) -> DVector<f64> {
    let mut x = DVector::zeros(points[active[0]].len());
    for (&i, &w) in active.iter().zip(weights) {
        x += &points[i] * w;
    }
    x
}

/// Affine weights (summing to one) of the minimum-norm point of the affine
/// hull of the active points.
fn affine_min_norm(points: &[DVector<f64>], active: &[usize]) -> Vec<f64> {
    let base = &points[active[0]];
    let m = active.len() - 1;
    if m == 0 {
        return vec![1.0];
    }
    let dim = base.len();
    let d = DMatrix::from_fn(dim, m, |r, c| points[active[c + 1]][r] - base[r]);
    let gram = d.transpose() * &d;
    let rhs = -(d.transpose() * base);
    let beta = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .unwrap_or_else(|_| DVector::zeros(m)),
    };
    let mut alpha = Vec::with_capacity(m + 1);
    alpha.push(1.0 - beta.sum());
    alpha.extend(beta.iter().copied());
    alpha
}
