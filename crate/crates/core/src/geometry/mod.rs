//! Obstacle geometry: convex shapes, segment-to-obstacle distance, separating
//! hyperplanes, and convex decomposition of planar polygons.

mod decompose;
mod distance;
mod shape;
mod workspace;

use nalgebra::DVector;
use thiserror::Error;

pub use decompose::{convex_partition, decompose_nonconvex, is_convex_ccw, polygon_area};
pub use distance::{closest_points, min_distance, ClosestPoints};
pub use shape::{Ball, ConvexShape, Halfspace, Polytope};
pub use workspace::{Obstacle, PieceId, Workspace};

/// Distances at or below this value (workspace units) count as contact.
pub const ZERO_CLEARANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("clearance {distance:e} is at or below the contact threshold")]
    ZeroClearance { distance: f64 },
    #[error("invalid polygon: {0}")]
    InvalidPolygon(&'static str),
    #[error("polytope needs at least one vertex")]
    EmptyPolytope,
    #[error("ball radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("halfspace normal must have unit length, got norm {0}")]
    NonUnitNormal(f64),
    #[error("points must have dimension >= 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("segment endpoints coincide")]
    DegenerateSegment,
    #[error("distance to an unbounded shape is not defined")]
    Unbounded,
}

/// Straight path piece between two consecutive waypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    start: DVector<f64>,
    end: DVector<f64>,
}

impl Segment {
    pub fn new(start: DVector<f64>, end: DVector<f64>) -> Result<Self, GeometryError> {
        if start.len() != end.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: start.len(),
                found: end.len(),
            });
        }
        if start.len() < 2 {
            return Err(GeometryError::DimensionTooSmall(start.len()));
        }
        if start.iter().chain(end.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if start == end {
            return Err(GeometryError::DegenerateSegment);
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.start
    }

    pub fn end(&self) -> &DVector<f64> {
        &self.end
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    /// `start + s·(end − start)`.
    pub fn point_at(&self, s: f64) -> DVector<f64> {
        &self.start + (&self.end - &self.start) * s
    }

    pub fn closest_point_to(&self, p: &DVector<f64>) -> DVector<f64> {
        let dir = &self.end - &self.start;
        let s = ((p - &self.start).dot(&dir) / dir.norm_squared()).clamp(0.0, 1.0);
        self.point_at(s)
    }
}

/// The plane `normal·x − offset = 0` with the obstacle on its non-negative
/// side and the segment at distance `clearance` on the negative side.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatingHyperplane {
    pub normal: DVector<f64>,
    pub offset: f64,
    pub clearance: f64,
    /// Closest point on the obstacle; the plane passes through it.
    pub on_obstacle: DVector<f64>,
    /// Closest point on the segment.
    pub on_segment: DVector<f64>,
}

impl SeparatingHyperplane {
    /// `normal·x − offset`; negative on the segment side.
    pub fn signed_value(&self, x: &DVector<f64>) -> f64 {
        self.normal.dot(x) - self.offset
    }

    /// Distance from `x` to the plane measured towards the obstacle
    /// (`offset − normal·x`).
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        self.offset - self.normal.dot(x)
    }
}

/// Least-conservative separating plane for a segment and a convex obstacle:
/// perpendicular to the closest-pair line and passing through the obstacle's
/// witness point. A halfspace obstacle is its own separating plane.
pub fn separating_hyperplane(seg: &Segment, obs: &ConvexShape) -> Result<SeparatingHyperplane, GeometryError> {
    if let ConvexShape::Halfspace(h) = obs {
        if seg.dim() != h.normal.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: seg.dim(),
                found: h.normal.len(),
            });
        }
        let nearest = if h.normal.dot(seg.start()) >= h.normal.dot(seg.end()) {
            seg.start()
        } else {
            seg.end()
        };
        let clearance = h.offset - h.normal.dot(nearest);
        if clearance <= ZERO_CLEARANCE {
            return Err(GeometryError::ZeroClearance {
                distance: clearance.max(0.0),
            });
        }
        return Ok(SeparatingHyperplane {
            normal: h.normal.clone(),
            offset: h.offset,
            clearance,
            on_obstacle: nearest + &h.normal * clearance,
            on_segment: nearest.clone(),
        });
    }
    let closest = min_distance(seg, obs)?;
    let normal = (&closest.on_obstacle - &closest.on_segment) / closest.distance;
    let offset = normal.dot(&closest.on_obstacle);
    Ok(SeparatingHyperplane {
        normal,
        offset,
        clearance: closest.distance,
        on_obstacle: closest.on_obstacle,
        on_segment: closest.on_segment,
    })
}
