//! Planned trajectories, the open-loop deviation process, and covariance
//! assembly for projected deviations sampled on time grids.
//!
//! Tracking a piecewise-linear plan in open loop under `dx = v dt + R^½ dw`
//! leaves a deviation `x(t)` that is a Brownian motion with covariance
//! `Σ_x(t) = t·R`. Projections `aᵀx(t)` are therefore scalar Brownian motions,
//! and every covariance built here can be cross-checked against the min-rule
//! `cov(aᵀx(s), bᵀx(t)) = aᵀ Σ_x(min(s, t)) b`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::gaussian::{GaussianError, GaussianVector};
use crate::geometry::Segment;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcessError {
    #[error("a trajectory needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoints {index} and {} coincide", .index + 1)]
    DegenerateSegment { index: usize },
    #[error("waypoint {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("waypoints must have dimension >= 2")]
    DimensionTooSmall,
    #[error("non-finite waypoint coordinate at index {0}")]
    NonFinite(usize),
    #[error("speed must be positive and finite, got {0}")]
    InvalidSpeed(f64),
    #[error("expected {expected} durations, got {found}")]
    DurationCount { expected: usize, found: usize },
    #[error("duration {index} must be positive and finite, got {value}")]
    InvalidDuration { index: usize, value: f64 },
    #[error("noise matrix must be {expected}x{expected}")]
    NoiseShape { expected: usize },
    #[error("noise matrix is not symmetric at ({row}, {col})")]
    NoiseNotSymmetric { row: usize, col: usize },
    #[error("noise matrix is not positive definite")]
    NoiseNotPositiveDefinite,
    #[error("grid for segment {segment}: {reason}")]
    InvalidGrid { segment: usize, reason: &'static str },
    #[error("segment index {index} out of range ({count} segments)")]
    SegmentOutOfRange { index: usize, count: usize },
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

/// How segment durations are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Timing {
    /// Constant commanded speed: `Δt_j = ‖x_{j+1} − x_j‖ / speed`.
    Speed(f64),
    /// Explicit per-segment durations, used verbatim.
    Durations(Vec<f64>),
}

/// Waypoints with a time partition; the plan interpolates linearly between
/// consecutive waypoints at constant velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedTrajectory {
    waypoints: Vec<DVector<f64>>,
    durations: Vec<f64>,
    times: Vec<f64>,
}

impl PlannedTrajectory {
    pub fn new(waypoints: Vec<DVector<f64>>, timing: Timing) -> Result<Self, ProcessError> {
        if waypoints.len() < 2 {
            return Err(ProcessError::TooFewWaypoints(waypoints.len()));
        }
        let dim = waypoints[0].len();
        if dim < 2 {
            return Err(ProcessError::DimensionTooSmall);
        }
        for (index, w) in waypoints.iter().enumerate() {
            if w.len() != dim {
                return Err(ProcessError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: w.len(),
                });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(ProcessError::NonFinite(index));
            }
        }
        for (index, pair) in waypoints.windows(2).enumerate() {
            if pair[0] == pair[1] {
                return Err(ProcessError::DegenerateSegment { index });
            }
        }

        let segments = waypoints.len() - 1;
        let durations = match timing {
            Timing::Speed(speed) => {
                if !(speed > 0.0) || !speed.is_finite() {
                    return Err(ProcessError::InvalidSpeed(speed));
                }
                waypoints.windows(2).map(|p| (&p[1] - &p[0]).norm() / speed).collect()
            }
            Timing::Durations(d) => {
                if d.len() != segments {
                    return Err(ProcessError::DurationCount {
                        expected: segments,
                        found: d.len(),
                    });
                }
                d
            }
        };
        for (index, &value) in durations.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ProcessError::InvalidDuration { index, value });
            }
        }

        let mut times = Vec::with_capacity(durations.len() + 1);
        times.push(0.0);
        let mut t = 0.0;
        for d in &durations {
            t += d;
            times.push(t);
        }
        Ok(Self {
            waypoints,
            durations,
            times,
        })
    }

    pub fn dim(&self) -> usize {
        self.waypoints[0].len()
    }

    pub fn num_segments(&self) -> usize {
        self.durations.len()
    }

    pub fn waypoints(&self) -> &[DVector<f64>] {
        &self.waypoints
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    /// Partition `0 = t_0 < t_1 < … < t_N = T`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn total_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Planned velocity on segment `j`.
    pub fn velocity(&self, j: usize) -> DVector<f64> {
        (&self.waypoints[j + 1] - &self.waypoints[j]) / self.durations[j]
    }

    pub fn segment(&self, j: usize) -> Segment {
        Segment::new(self.waypoints[j].clone(), self.waypoints[j + 1].clone())
            .expect("consecutive waypoints are distinct")
    }

    /// Planned position at `t` on segment `j` (`t` is not clamped).
    pub fn position_on_segment(&self, j: usize, t: f64) -> DVector<f64> {
        let s = (t - self.times[j]) / self.durations[j];
        &self.waypoints[j] + (&self.waypoints[j + 1] - &self.waypoints[j]) * s
    }

    /// Planned position at any `t ∈ [0, T]`.
    pub fn position_at(&self, t: f64) -> DVector<f64> {
        self.position_on_segment(self.segment_at(t), t)
    }

    /// Index of the segment whose time interval contains `t` (the later one
    /// at shared endpoints).
    pub fn segment_at(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&tj| tj <= t);
        idx.saturating_sub(1).min(self.num_segments() - 1)
    }

    /// Same plan shifted and rotated: `x ↦ rotation·x + translation`.
    pub fn transformed(&self, rotation: &DMatrix<f64>, translation: &DVector<f64>) -> Self {
        Self {
            waypoints: self.waypoints.iter().map(|w| rotation * w + translation).collect(),
            durations: self.durations.clone(),
            times: self.times.clone(),
        }
    }
}

/// Convenience wrapper over [`PlannedTrajectory::new`].
pub fn build_trajectory(waypoints: Vec<DVector<f64>>, timing: Timing) -> Result<PlannedTrajectory, ProcessError> {
    PlannedTrajectory::new(waypoints, timing)
}

/// Diffusion intensity `R` (squared length per unit time).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    intensity: DMatrix<f64>,
    sqrt: DMatrix<f64>,
}

impl NoiseModel {
    pub fn new(intensity: DMatrix<f64>) -> Result<Self, ProcessError> {
        let n = intensity.nrows();
        if intensity.ncols() != n || n == 0 {
            return Err(ProcessError::NoiseShape { expected: n.max(1) });
        }
        if intensity.iter().any(|v| !v.is_finite()) {
            return Err(ProcessError::NoiseNotPositiveDefinite);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (intensity[(i, j)], intensity[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(ProcessError::NoiseNotSymmetric { row: i, col: j });
                }
            }
        }
        let intensity = (&intensity + intensity.transpose()) * 0.5;
        if intensity.clone().symmetric_eigenvalues().min() <= 0.0 {
            return Err(ProcessError::NoiseNotPositiveDefinite);
        }
        let sqrt = intensity
            .clone()
            .cholesky()
            .ok_or(ProcessError::NoiseNotPositiveDefinite)?
            .l();
        Ok(Self { intensity, sqrt })
    }

    /// `σ²·I` in `dim` dimensions.
    pub fn isotropic(dim: usize, variance_rate: f64) -> Result<Self, ProcessError> {
        Self::new(DMatrix::identity(dim, dim) * variance_rate)
    }

    pub fn dim(&self) -> usize {
        self.intensity.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.intensity
    }

    /// Lower Cholesky factor `L` with `L·Lᵀ = R`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    /// Variance rate of the projection `aᵀx`, i.e. `aᵀRa`.
    pub fn projected_rate(&self, a: &DVector<f64>) -> f64 {
        a.dot(&(&self.intensity * a))
    }
}

/// Deviation covariance at each waypoint time.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSchedule {
    covs: Vec<DMatrix<f64>>,
}

impl CovarianceSchedule {
    /// `Σ_{x_j}` at waypoint `j`.
    pub fn at_waypoint(&self, j: usize) -> &DMatrix<f64> {
        &self.covs[j]
    }

    pub fn len(&self) -> usize {
        self.covs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covs.is_empty()
    }

    /// Continuous-time covariance `Σ_x(t)` on segment `j`:
    /// `Σ_{x_j} + (t − t_j)·R`.
    pub fn on_segment(&self, traj: &PlannedTrajectory, noise: &NoiseModel, j: usize, t: f64) -> DMatrix<f64> {
        &self.covs[j] + noise.matrix() * (t - traj.times()[j])
    }

    /// Projected variance `aᵀ Σ_x(t) a` on segment `j`.
    pub fn projected_variance(
        &self,
        traj: &PlannedTrajectory,
        noise: &NoiseModel,
        j: usize,
        a: &DVector<f64>,
        t: f64,
    ) -> f64 {
        let start = a.dot(&(&self.covs[j] * a));
        start + (t - traj.times()[j]) * noise.projected_rate(a)
    }
}

/// `Σ_{x_0} = 0`, `Σ_{x_{j+1}} = Σ_{x_j} + Δt_j·R`.
pub fn propagate_covariance(traj: &PlannedTrajectory, noise: &NoiseModel) -> CovarianceSchedule {
    assert_eq!(traj.dim(), noise.dim(), "noise dimension must match the trajectory");
    let n = traj.dim();
    let mut covs = Vec::with_capacity(traj.num_segments() + 1);
    covs.push(DMatrix::zeros(n, n));
    for &dt in traj.durations() {
        let next = covs.last().unwrap() + noise.matrix() * dt;
        covs.push(next);
    }
    CovarianceSchedule { covs }
}

/// Sample times `t_j = τ_0 < τ_1 < … < τ_r = t_{j+1}` inside one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGrid {
    segment: usize,
    times: Vec<f64>,
}

impl SegmentGrid {
    /// `r` equal steps over segment `segment`.
    pub fn uniform(traj: &PlannedTrajectory, segment: usize, r: usize) -> Result<Self, ProcessError> {
        check_segment(traj, segment)?;
        if r == 0 {
            return Err(ProcessError::InvalidGrid {
                segment,
                reason: "refinement must be at least 1",
            });
        }
        let (t0, t1) = (traj.times()[segment], traj.times()[segment + 1]);
        let times = (0..=r)
            .map(|i| {
                if i == r {
                    t1
                } else {
                    t0 + (t1 - t0) * i as f64 / r as f64
                }
            })
            .collect();
        Ok(Self { segment, times })
    }

    /// Arbitrary strictly increasing grid whose endpoints are the segment's
    /// start and end times.
    pub fn custom(traj: &PlannedTrajectory, segment: usize, times: Vec<f64>) -> Result<Self, ProcessError> {
        check_segment(traj, segment)?;
        if times.len() < 2 {
            return Err(ProcessError::InvalidGrid {
                segment,
                reason: "need at least two grid times",
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ProcessError::InvalidGrid {
                segment,
                reason: "grid times must be strictly increasing",
            });
        }
        let (t0, t1) = (traj.times()[segment], traj.times()[segment + 1]);
        if times[0] != t0 || times[times.len() - 1] != t1 {
            return Err(ProcessError::InvalidGrid {
                segment,
                reason: "grid endpoints must match the segment's time interval",
            });
        }
        Ok(Self { segment, times })
    }

    pub fn segment(&self) -> usize {
        self.segment
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of steps `r` (the grid has `r + 1` points).
    pub fn refinement(&self) -> usize {
        self.times.len() - 1
    }

    fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.windows(2).map(|w| w[1] - w[0])
    }
}

fn check_segment(traj: &PlannedTrajectory, segment: usize) -> Result<(), ProcessError> {
    if segment >= traj.num_segments() {
        Err(ProcessError::SegmentOutOfRange {
            index: segment,
            count: traj.num_segments(),
        })
    } else {
        Ok(())
    }
}

/// `M = 1 ⊗ aᵀ`: every grid value starts from the segment's initial deviation.
fn start_map(a: &DVector<f64>, points: usize) -> DMatrix<f64> {
    DMatrix::from_fn(points, a.len(), |_, c| a[c])
}

/// Block lower-triangular `K`: row `i` accumulates the first `i` increments.
fn increment_map(a: &DVector<f64>, steps: usize) -> DMatrix<f64> {
    let n = a.len();
    DMatrix::from_fn(steps + 1, n * steps, |r, c| if c / n < r { a[c % n] } else { 0.0 })
}

/// Block-diagonal covariance of the increments, `diag(Δτ_i·R)`.
fn increment_covariance(grid: &SegmentGrid, noise: &NoiseModel) -> DMatrix<f64> {
    let n = noise.dim();
    let steps = grid.refinement();
    let mut out = DMatrix::zeros(n * steps, n * steps);
    for (i, dt) in grid.steps().enumerate() {
        out.view_mut((i * n, i * n), (n, n)).copy_from(&(noise.matrix() * dt));
    }
    out
}

/// Covariance of `(aᵀx(τ_0), …, aᵀx(τ_r))` on one segment:
/// `M Σ_{x_j} Mᵀ + K Σ_n Kᵀ`.
pub fn segment_covariance(
    a: &DVector<f64>,
    grid: &SegmentGrid,
    sched: &CovarianceSchedule,
    noise: &NoiseModel,
) -> DMatrix<f64> {
    let m = start_map(a, grid.times().len());
    let k = increment_map(a, grid.refinement());
    let sigma_n = increment_covariance(grid, noise);
    let start = sched.at_waypoint(grid.segment());
    &m * start * m.transpose() + &k * sigma_n * k.transpose()
}

/// [`segment_covariance`] wrapped as a validated Gaussian vector.
pub fn segment_gaussian(
    a: &DVector<f64>,
    grid: &SegmentGrid,
    sched: &CovarianceSchedule,
    noise: &NoiseModel,
) -> Result<GaussianVector, ProcessError> {
    Ok(GaussianVector::new(segment_covariance(a, grid, sched, noise))?)
}

/// Cross-covariance between the grid values of segment `j` (normal `a`) and
/// of segment `j + 1` (normal `b`):
/// `M_j Σ_{x_j} M_{j+1}ᵀ + K_j Σ_n G_jᵀ M_{j+1}ᵀ`, where `G_j = [I … I]` sums
/// segment `j`'s increments into the next segment's starting deviation.
pub fn cross_covariance(
    a: &DVector<f64>,
    b: &DVector<f64>,
    grid: &SegmentGrid,
    next_grid: &SegmentGrid,
    sched: &CovarianceSchedule,
    noise: &NoiseModel,
) -> Result<DMatrix<f64>, ProcessError> {
    if next_grid.segment() != grid.segment() + 1 {
        return Err(ProcessError::InvalidGrid {
            segment: next_grid.segment(),
            reason: "cross covariance needs consecutive segments",
        });
    }
    let n = noise.dim();
    let steps = grid.refinement();
    let m_j = start_map(a, grid.times().len());
    let m_next = start_map(b, next_grid.times().len());
    let k_j = increment_map(a, steps);
    let sigma_n = increment_covariance(grid, noise);
    let g_j = DMatrix::from_fn(n, n * steps, |r, c| if c % n == r { 1.0 } else { 0.0 });
    let start = sched.at_waypoint(grid.segment());
    Ok(&m_j * start * m_next.transpose() + &k_j * sigma_n * g_j.transpose() * m_next.transpose())
}

/// Joint covariance `[[Σ_j, H], [Hᵀ, Σ_{j+1}]]` of two consecutive grids.
pub fn stacked_covariance(
    a: &DVector<f64>,
    b: &DVector<f64>,
    grid: &SegmentGrid,
    next_grid: &SegmentGrid,
    sched: &CovarianceSchedule,
    noise: &NoiseModel,
) -> Result<DMatrix<f64>, ProcessError> {
    let s_j = segment_covariance(a, grid, sched, noise);
    let s_next = segment_covariance(b, next_grid, sched, noise);
    let h = cross_covariance(a, b, grid, next_grid, sched, noise)?;
    let (p, q) = (s_j.nrows(), s_next.nrows());
    let mut out = DMatrix::zeros(p + q, p + q);
    out.view_mut((0, 0), (p, p)).copy_from(&s_j);
    out.view_mut((p, p), (q, q)).copy_from(&s_next);
    out.view_mut((0, p), (p, q)).copy_from(&h);
    out.view_mut((p, 0), (q, p)).copy_from(&h.transpose());
    Ok(out)
}
