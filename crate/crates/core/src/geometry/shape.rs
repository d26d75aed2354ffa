use nalgebra::DVector;

use super::distance::point_to_hull_distance;
use super::GeometryError;

const UNIT_NORM_TOL: f64 = 1e-12;

/// Convex hull of a finite vertex list.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    vertices: Vec<DVector<f64>>,
    /// Counter-clockwise hull of a full-dimensional planar polytope.
    hull: Option<Vec<[f64; 2]>>,
    /// Outward edge normals `(nx, ny, c)` of `hull` with interior
    /// `nx·x + ny·y ≤ c`; edge `i` runs from `hull[i]` to `hull[i + 1]`.
    edges: Option<Vec<[f64; 3]>>,
}

impl Polytope {
    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    /// Planar hull inequalities `nx·x + ny·y ≤ c`, when the hull has interior.
    pub fn edges(&self) -> Option<&[[f64; 3]]> {
        self.edges.as_deref()
    }

    /// Counter-clockwise planar hull vertices, when the hull has interior.
    pub fn hull(&self) -> Option<&[[f64; 2]]> {
        self.hull.as_deref()
    }

    fn contains(&self, p: &DVector<f64>) -> bool {
        match &self.edges {
            Some(edges) => edges.iter().all(|e| e[0] * p[0] + e[1] * p[1] <= e[2]),
            None => point_to_hull_distance(p, &self.vertices) <= 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: DVector<f64>,
    pub radius: f64,
}

/// `{x : normal·x − offset ≥ 0}`. Only used as an unbounded over-approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

/// A convex obstacle (or obstacle piece).
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexShape {
    Polytope(Polytope),
    Ball(Ball),
    Halfspace(Halfspace),
}

impl ConvexShape {
    /// Convex hull of `vertices`; all vertices must share a dimension `≥ 2`.
    pub fn polytope(vertices: Vec<DVector<f64>>) -> Result<Self, GeometryError> {
        let Some(first) = vertices.first() else {
            return Err(GeometryError::EmptyPolytope);
        };
        let dim = first.len();
        check_dim(dim)?;
        for v in &vertices {
            if v.len() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            check_finite(v)?;
        }
        let hull = if dim == 2 { planar_hull(&vertices) } else { None };
        let edges = hull.as_deref().map(hull_edges);
        Ok(Self::Polytope(Polytope { vertices, hull, edges }))
    }

    /// Planar convenience constructor.
    pub fn polygon(vertices: &[[f64; 2]]) -> Result<Self, GeometryError> {
        Self::polytope(vertices.iter().map(|v| DVector::from_column_slice(v)).collect())
    }

    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self, GeometryError> {
        check_dim(center.len())?;
        check_finite(&center)?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeometryError::InvalidRadius(radius));
        }
        Ok(Self::Ball(Ball { center, radius }))
    }

    pub fn halfspace(normal: DVector<f64>, offset: f64) -> Result<Self, GeometryError> {
        check_dim(normal.len())?;
        check_finite(&normal)?;
        if ((normal.norm() - 1.0).abs() > UNIT_NORM_TOL) || !offset.is_finite() {
            return Err(GeometryError::NonUnitNormal(normal.norm()));
        }
        Ok(Self::Halfspace(Halfspace { normal, offset }))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Polytope(p) => p.dim(),
            Self::Ball(b) => b.center.len(),
            Self::Halfspace(h) => h.normal.len(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Self::Halfspace(_))
    }

    /// Exact point membership (closed set).
    pub fn contains(&self, p: &DVector<f64>) -> bool {
        match self {
            Self::Polytope(poly) => poly.contains(p),
            Self::Ball(b) => (p - &b.center).norm_squared() <= b.radius * b.radius,
            Self::Halfspace(h) => h.normal.dot(p) - h.offset >= 0.0,
        }
    }

    /// Point of the shape maximizing `dir·x`. `None` for halfspaces.
    pub fn support(&self, dir: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Self::Polytope(p) => p
                .vertices
                .iter()
                .max_by(|a, b| a.dot(dir).total_cmp(&b.dot(dir)))
                .cloned(),
            Self::Ball(b) => {
                let n = dir.norm();
                if n == 0.0 {
                    Some(b.center.clone())
                } else {
                    Some(&b.center + dir * (b.radius / n))
                }
            }
            Self::Halfspace(_) => None,
        }
    }

    /// Axis-aligned bounding box `(min, max)`; `None` for halfspaces.
    pub fn bounding_box(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        match self {
            Self::Polytope(p) => {
                let mut lo = p.vertices[0].clone();
                let mut hi = p.vertices[0].clone();
                for v in &p.vertices[1..] {
                    lo = lo.inf(v);
                    hi = hi.sup(v);
                }
                Some((lo, hi))
            }
            Self::Ball(b) => Some((b.center.add_scalar(-b.radius), b.center.add_scalar(b.radius))),
            Self::Halfspace(_) => None,
        }
    }

    /// Applies `x ↦ rotation·x + translation`.
    pub fn transformed(&self, rotation: &nalgebra::DMatrix<f64>, translation: &DVector<f64>) -> Self {
        match self {
            Self::Polytope(p) => {
                let vertices = p.vertices.iter().map(|v| rotation * v + translation).collect();
                Self::polytope(vertices).expect("rigid motion preserves validity")
            }
            Self::Ball(b) => Self::Ball(Ball {
                center: rotation * &b.center + translation,
                radius: b.radius,
            }),
            Self::Halfspace(h) => {
                let normal = rotation * &h.normal;
                let offset = h.offset + normal.dot(translation);
                Self::Halfspace(Halfspace { normal, offset })
            }
        }
    }
}

fn check_dim(dim: usize) -> Result<(), GeometryError> {
    if dim < 2 {
        Err(GeometryError::DimensionTooSmall(dim))
    } else {
        Ok(())
    }
}

fn check_finite(v: &DVector<f64>) -> Result<(), GeometryError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(GeometryError::NonFinite)
    }
}

/// Andrew's monotone chain; the CCW hull, or `None` when it has no interior.
fn planar_hull(vertices: &[DVector<f64>]) -> Option<Vec<[f64; 2]>> {
    let mut pts: Vec<[f64; 2]> = vertices.iter().map(|v| [v[0], v[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return None;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let chain = |iter: &mut dyn Iterator<Item = &[f64; 2]>| {
        let mut out: Vec<[f64; 2]> = Vec::new();
        for &p in iter {
            while out.len() >= 2 && cross(out[out.len() - 2], out[out.len() - 1], p) <= 0.0 {
                out.pop();
            }
            out.push(p);
        }
        out.pop();
        out
    };
    let mut hull = chain(&mut pts.iter());
    hull.extend(chain(&mut pts.iter().rev()));
    (hull.len() >= 3).then_some(hull)
}

fn hull_edges(hull: &[[f64; 2]]) -> Vec<[f64; 3]> {
    (0..hull.len())
        .map(|i| {
            let a = hull[i];
            let b = hull[(i + 1) % hull.len()];
            // Outward normal of a CCW edge is (dy, -dx).
            let (nx, ny) = (b[1] - a[1], a[0] - b[0]);
            [nx, ny, nx * a[0] + ny * a[1]]
        })
        .collect()
}
