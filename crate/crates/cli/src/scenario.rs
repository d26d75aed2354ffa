//! The `brisk/1` scenario document.
//!
//! A scenario is a single JSON object. Emitting a parsed scenario and parsing
//! it again reproduces it exactly, and emitting twice is byte-identical.
//!
//! ```json
//! {
//!   "version": "brisk/1",
//!   "workspace": { "min": [0.0, 0.0], "max": [1.0, 1.0] },
//!   "obstacles": [
//!     { "type": "polygon", "vertices": [[0.3, 0.3], [0.5, 0.3], [0.4, 0.5]] },
//!     { "type": "box", "min": [0.6, 0.1], "max": [0.8, 0.2] },
//!     { "type": "circle", "center": [0.7, 0.7], "radius": 0.1 }
//!   ],
//!   "waypoints": [[0.1, 0.1], [0.9, 0.1]],
//!   "noise": 0.001,
//!   "speed": 1.0
//! }
//! ```
//!
//! `noise` is either `σ²` (meaning `σ²·I`) or a full symmetric matrix.
//! Exactly one of `speed` and `durations` is required. A polygon may carry
//! `convex_pieces`, which then replace its automatic decomposition.

use std::fmt;
use std::path::Path;

use brisk_core::geometry::{ConvexShape, Obstacle, Workspace};
use brisk_core::process::{NoiseModel, PlannedTrajectory, Timing};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "brisk/1";

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: String,
    pub workspace: BoxRegion,
    pub obstacles: Vec<ObstacleSpec>,
    /// Informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<CircleRegion>,
    pub waypoints: Vec<Point>,
    pub noise: NoiseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub durations: Option<Vec<f64>>,
    #[serde(default)]
    pub estimator: EstimatorSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRegion {
    pub min: Point,
    pub max: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleRegion {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleSpec {
    Polygon {
        vertices: Vec<Point>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        convex_pieces: Option<Vec<Vec<Point>>>,
    },
    Box {
        min: Point,
        max: Point,
    },
    Circle {
        center: Point,
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSpec {
    pub r_seg: usize,
    pub r_d: usize,
    pub mvn_tol: f64,
    pub mc_paths: usize,
    pub seed: u64,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            r_seg: 4,
            r_d: 100,
            mvn_tol: 1e-6,
            mc_paths: 100_000,
            seed: 0x5eed_b415,
        }
    }
}

/// A diagnostic pointing at the offending field and, for syntax and type
/// errors, at the line and column.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub field: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ScenarioError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            line: None,
            column: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let (Some(line), Some(column)) = (self.line, self.column) {
            write!(f, "line {line}, column {column}: ")?;
        }
        if !self.field.is_empty() && self.field != "." {
            write!(f, "{}: ", self.field)?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ScenarioError {}

/// Validated scenario with the library objects built from it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub trajectory: PlannedTrajectory,
    pub noise: NoiseModel,
    pub workspace: Workspace,
}

impl ScenarioFile {
    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            let path = e.path().to_string();
            ScenarioError {
                field: refine_obstacle_path(text, &path).unwrap_or(path),
                line: Some(inner.line()),
                column: Some(inner.column()),
                message: strip_position(&inner.to_string()),
            }
        })?;
        file.build()?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::field("", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Pretty JSON with a trailing newline.
    pub fn emit(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        if self.version != SCHEMA {
            return Err(ScenarioError::field(
                "version",
                format!("unsupported version {:?}, expected {SCHEMA:?}", self.version),
            ));
        }
        let [lo, hi] = [self.workspace.min, self.workspace.max];
        finite_points("workspace", &[lo, hi])?;
        if !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(ScenarioError::field("workspace", "min must be below max in every axis"));
        }
        if let Some(goal) = &self.goal {
            finite_points("goal.center", &[goal.center])?;
            if !(goal.radius.is_finite() && goal.radius > 0.0) {
                return Err(ScenarioError::field("goal.radius", "must be finite and positive"));
            }
        }

        let workspace = Scenario::obstacles_of(self)?;

        finite_points("waypoints", &self.waypoints)?;
        let timing = match (self.speed, &self.durations) {
            (Some(v), None) => Timing::Speed(v),
            (None, Some(d)) => Timing::Durations(d.clone()),
            (Some(_), Some(_)) => {
                return Err(ScenarioError::field(
                    "speed",
                    "give either speed or durations, not both",
                ))
            }
            (None, None) => return Err(ScenarioError::field("speed", "one of speed or durations is required")),
        };
        let waypoints = self.waypoints.iter().map(|p| DVector::from_column_slice(p)).collect();
        let trajectory = PlannedTrajectory::new(waypoints, timing).map_err(|e| {
            let field = match e {
                brisk_core::process::ProcessError::InvalidSpeed(_) => "speed",
                brisk_core::process::ProcessError::DurationCount { .. }
                | brisk_core::process::ProcessError::InvalidDuration { .. } => "durations",
                _ => "waypoints",
            };
            ScenarioError::field(field, e.to_string())
        })?;

        let intensity = match &self.noise {
            NoiseSpec::Scalar(v) => {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(ScenarioError::field(
                        "noise",
                        "variance rate must be finite and positive",
                    ));
                }
                DMatrix::from_diagonal_element(2, 2, *v)
            }
            NoiseSpec::Matrix(rows) => {
                if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
                    return Err(ScenarioError::field("noise", "matrix must be 2×2"));
                }
                DMatrix::from_fn(2, 2, |i, j| rows[i][j])
            }
        };
        let noise = NoiseModel::new(intensity).map_err(|e| ScenarioError::field("noise", e.to_string()))?;

        let est = &self.estimator;
        if est.r_seg == 0 {
            return Err(ScenarioError::field("estimator.r_seg", "must be at least 1"));
        }
        if est.r_d == 0 {
            return Err(ScenarioError::field("estimator.r_d", "must be at least 1"));
        }
        if !(est.mvn_tol.is_finite() && est.mvn_tol > 0.0) {
            return Err(ScenarioError::field("estimator.mvn_tol", "must be finite and positive"));
        }

        Ok(Scenario {
            file: self.clone(),
            trajectory,
            noise,
            workspace,
        })
    }
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        file.build()
    }

    /// The obstacles alone, validated.
    pub fn obstacles_of(file: &ScenarioFile) -> Result<Workspace, ScenarioError> {
        let obstacles = file
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| build_obstacle(o, &format!("obstacles[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Workspace::new(obstacles))
    }
}

fn build_obstacle(spec: &ObstacleSpec, field: &str) -> Result<Obstacle, ScenarioError> {
    let geometry = |e: brisk_core::geometry::GeometryError| ScenarioError::field(field, e.to_string());
    match spec {
        ObstacleSpec::Polygon {
            vertices,
            convex_pieces,
        } => {
            finite_points(&format!("{field}.vertices"), vertices)?;
            match convex_pieces {
                None => Obstacle::polygon(vertices).map_err(geometry),
                Some(pieces) => {
                    let shapes = pieces
                        .iter()
                        .enumerate()
                        .map(|(k, piece)| {
                            let f = format!("{field}.convex_pieces[{k}]");
                            finite_points(&f, piece)?;
                            ConvexShape::polygon(piece).map_err(|e| ScenarioError::field(f, e.to_string()))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Obstacle::from_pieces(shapes).map_err(geometry)
                }
            }
        }
        ObstacleSpec::Box { min, max } => {
            finite_points(field, &[*min, *max])?;
            if !(min[0] < max[0] && min[1] < max[1]) {
                return Err(ScenarioError::field(field, "min must be below max in every axis"));
            }
            let corners = [*min, [max[0], min[1]], *max, [min[0], max[1]]];
            ConvexShape::polygon(&corners).map(Obstacle::convex).map_err(geometry)
        }
        ObstacleSpec::Circle { center, radius } => {
            finite_points(&format!("{field}.center"), &[*center])?;
            if !radius.is_finite() {
                return Err(ScenarioError::field(format!("{field}.radius"), "must be finite"));
            }
            ConvexShape::ball(DVector::from_column_slice(center), *radius)
                .map(Obstacle::convex)
                .map_err(|e| ScenarioError::field(format!("{field}.radius"), e.to_string()))
        }
    }
}

fn finite_points(field: &str, points: &[Point]) -> Result<(), ScenarioError> {
    match points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
        Some(i) => Err(ScenarioError::field(
            format!("{field}[{i}]"),
            "coordinates must be finite",
        )),
        None => Ok(()),
    }
}

/// serde_json appends " at line L column C", which the diagnostic already
/// carries.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct PolygonFields {
    vertices: Vec<Point>,
    #[serde(default)]
    convex_pieces: Option<Vec<Vec<Point>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct BoxFields {
    min: Point,
    max: Point,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct CircleFields {
    center: Point,
    radius: f64,
}

/// Tagged obstacles are buffered before decoding, which hides the failing
/// member; decoding the element again as its variant recovers it.
fn refine_obstacle_path(text: &str, path: &str) -> Option<String> {
    let index: usize = path.strip_prefix("obstacles[")?.strip_suffix(']')?.parse().ok()?;
    let root: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut element = root.get("obstacles")?.get(index)?.as_object()?.clone();
    let tag = element.remove("type")?;
    let element = serde_json::Value::Object(element);
    let inner = match tag.as_str()? {
        "polygon" => serde_path_to_error::deserialize::<_, PolygonFields>(&element)
            .err()?
            .path()
            .to_string(),
        "box" => serde_path_to_error::deserialize::<_, BoxFields>(&element)
            .err()?
            .path()
            .to_string(),
        "circle" => serde_path_to_error::deserialize::<_, CircleFields>(&element)
            .err()?
            .path()
            .to_string(),
        _ => return None,
    };
    (inner != ".").then(|| format!("{path}.{inner}"))
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}
