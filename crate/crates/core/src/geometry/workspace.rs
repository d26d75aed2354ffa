use nalgebra::{DMatrix, DVector};

use super::decompose::decompose_nonconvex;
use super::shape::ConvexShape;
use super::GeometryError;

/// One obstacle as a union of convex pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pieces: Vec<ConvexShape>,
}

impl Obstacle {
    pub fn convex(shape: ConvexShape) -> Self {
        Self { pieces: vec![shape] }
    }

    /// Simple planar polygon, split into convex pieces when non-convex.
    pub fn polygon(vertices: &[[f64; 2]]) -> Result<Self, GeometryError> {
        Ok(Self {
            pieces: decompose_nonconvex(vertices)?,
        })
    }

    /// Caller-supplied convex cover; pieces may overlap.
    pub fn from_pieces(pieces: Vec<ConvexShape>) -> Result<Self, GeometryError> {
        let Some(first) = pieces.first() else {
            return Err(GeometryError::EmptyPolytope);
        };
        let dim = first.dim();
        if let Some(bad) = pieces.iter().find(|p| p.dim() != dim) {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[ConvexShape] {
        &self.pieces
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].dim()
    }

    pub fn contains(&self, p: &DVector<f64>) -> bool {
        self.pieces.iter().any(|s| s.contains(p))
    }

    pub fn transformed(&self, rotation: &DMatrix<f64>, translation: &DVector<f64>) -> Self {
        Self {
            pieces: self
                .pieces
                .iter()
                .map(|s| s.transformed(rotation, translation))
                .collect(),
        }
    }
}

/// Index of a convex piece within a [`Workspace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PieceId {
    pub obstacle: usize,
    pub piece: usize,
}

/// The obstacle set `X_obs`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Workspace {
    obstacles: Vec<Obstacle>,
}

impl Workspace {
    pub fn new(obstacles: Vec<Obstacle>) -> Self {
        Self { obstacles }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn push(&mut self, obstacle: Obstacle) {
        self.obstacles.push(obstacle);
    }

    /// Every convex piece in obstacle order.
    pub fn pieces(&self) -> impl Iterator<Item = (PieceId, &ConvexShape)> + '_ {
        self.obstacles.iter().enumerate().flat_map(|(o, obs)| {
            obs.pieces
                .iter()
                .enumerate()
                .map(move |(p, s)| (PieceId { obstacle: o, piece: p }, s))
        })
    }

    pub fn num_pieces(&self) -> usize {
        self.obstacles.iter().map(|o| o.pieces.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    pub fn contains(&self, p: &DVector<f64>) -> bool {
        self.obstacles.iter().any(|o| o.contains(p))
    }

    pub fn transformed(&self, rotation: &DMatrix<f64>, translation: &DVector<f64>) -> Self {
        Self {
            obstacles: self
                .obstacles
                .iter()
                .map(|o| o.transformed(rotation, translation))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonconvex_polygon_is_split() {
        let l = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
        let ws = Workspace::new(vec![
            Obstacle::polygon(&l).unwrap(),
            Obstacle::convex(ConvexShape::ball(DVector::from_vec(vec![5.0, 5.0]), 1.0).unwrap()),
        ]);
        assert_eq!(ws.num_pieces(), 3);
        let ids: Vec<PieceId> = ws.pieces().map(|(id, _)| id).collect();
        assert_eq!(ids[2], PieceId { obstacle: 1, piece: 0 });
        assert!(ws.contains(&DVector::from_vec(vec![0.5, 1.5])));
        assert!(!ws.contains(&DVector::from_vec(vec![1.5, 1.5])));
    }

    #[test]
    fn piece_dimensions_must_agree() {
        let a = ConvexShape::ball(DVector::from_vec(vec![0.0, 0.0]), 1.0).unwrap();
        let b = ConvexShape::ball(DVector::from_vec(vec![0.0, 0.0, 0.0]), 1.0).unwrap();
        assert!(Obstacle::from_pieces(vec![a, b]).is_err());
        assert!(Obstacle::from_pieces(vec![]).is_err());
    }
}
