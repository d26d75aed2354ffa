//! Analytical collision-risk bounds.
//!
//! Each convex obstacle piece is replaced, per segment, by the halfspace
//! beyond its least-conservative separating plane. The deviation
//! `z(t) = aᵀ(x(t) − x^plan(t))` is then a scalar Brownian motion and the
//! segment crosses the plane only if `sup z ≥ d`, with `d` the clearance.
//!
//! - Per segment, `p_j = P(z_s ≥ d) + 2·P(z_s < d, z_e ≥ d)` exactly, from the
//!   reflection principle conditioned on the start of the segment.
//! - The first-order bound sums `p_j`; the second-order bound subtracts
//!   lower bounds on consecutive joint crossings, obtained from the
//!   deviation sampled on nested time grids.
//! - Pieces are aggregated by summation.

mod chain;
mod point_mass;

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::gaussian::{
    bivariate_normal_upper, mvn_cdf, std_normal_sf, GaussianError, GaussianVector, MvnEstimate, MvnOptions,
};
use crate::geometry::{separating_hyperplane, ConvexShape, GeometryError, PieceId, SeparatingHyperplane, Workspace};
use crate::montecarlo::McEstimate;
use crate::process::{
    propagate_covariance, segment_covariance, stacked_covariance, CovarianceSchedule, NoiseModel, PlannedTrajectory,
    ProcessError, SegmentGrid,
};

/// How the discrete-time baseline evaluates each per-step probability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteMethod {
    /// `P(x(t_i) ∈ piece)` under the Gaussian tracking error. Exact for
    /// halfspaces and planar pieces; other pieces use the segment plane.
    #[default]
    PointMass,
    /// `P(aᵀ(x − x^plan) ≥ b − aᵀx^plan(t_i))` with the step's segment plane.
    SegmentPlane,
}

impl DiscreteMethod {
    pub fn description(self) -> &'static str {
        match self {
            DiscreteMethod::PointMass => {
                "Gaussian mass of each piece at every substep; non-planar bounded pieces fall back to the segment plane; shared waypoints counted once"
            }
            DiscreteMethod::SegmentPlane => {
                "separating plane of the step's segment with clearance from the interpolated plan; shared waypoints counted once using the smaller term"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiskError {
    #[error("dimension mismatch: trajectory {trajectory}, noise {noise}, obstacle piece {piece:?}")]
    DimensionMismatch {
        trajectory: usize,
        noise: usize,
        piece: Option<usize>,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

/// How consecutive-pair lower bounds are evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMethod {
    /// 1-D quadrature recursions over the Markov structure of the grid
    /// values; accurate to roughly 1e-10 in milliseconds.
    #[default]
    Recursion,
    /// Dense grid covariances and the randomized-lattice MVN CDF.
    Mvn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskConfig {
    /// Grid refinement `r_j` inside each segment for the pairwise terms.
    pub r_seg: usize,
    /// Substeps per segment for the discrete-time baseline.
    pub r_d: usize,
    pub pair_method: PairMethod,
    pub discrete_method: DiscreteMethod,
    /// Used by [`PairMethod::Mvn`]; the tolerance also sets which pairs are
    /// negligible under either method.
    pub mvn: MvnOptions,
    pub threads: Option<usize>,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            r_seg: 4,
            r_d: 100,
            pair_method: PairMethod::Recursion,
            discrete_method: DiscreteMethod::PointMass,
            mvn: MvnOptions::default(),
            threads: None,
        }
    }
}

/// Crossing probability of one segment against one piece.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentRisk {
    pub index: usize,
    /// Clearance `d_j`; zero when saturated.
    pub clearance: f64,
    pub p: f64,
    /// `P(z_s ≥ d)`: already beyond the plane when the segment starts.
    pub p_start: f64,
    /// `2·P(z_s < d, z_e ≥ d)`: crossing during the segment.
    pub p_cross: f64,
    pub ariu: f64,
    /// No separating plane exists (contact); every probability is 1.
    pub saturated: bool,
}

impl SegmentRisk {
    pub fn saturated(index: usize) -> Self {
        Self {
            index,
            clearance: 0.0,
            p: 1.0,
            p_start: 1.0,
            p_cross: 0.0,
            ariu: 1.0,
            saturated: true,
        }
    }
}

/// Lower bound on the joint crossing probability of segments `j`, `j + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRisk {
    pub index: usize,
    /// Floored at zero.
    pub p_lb: f64,
    /// Before flooring.
    pub p_lb_unfloored: f64,
    pub grid_sizes: (usize, usize),
    /// Error estimate: the sum of the three MVN error estimates, or the
    /// change under a doubled quadrature resolution.
    pub mvn_err: f64,
    pub converged: bool,
    /// The pair was not evaluated because a marginal is below the MVN
    /// tolerance or a segment is saturated; `p_lb = 0` is then a valid bound.
    pub skipped: bool,
}

impl PairRisk {
    fn skipped(index: usize, grid_sizes: (usize, usize)) -> Self {
        Self {
            index,
            p_lb: 0.0,
            p_lb_unfloored: 0.0,
            grid_sizes,
            mvn_err: 0.0,
            converged: true,
            skipped: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Bounds {
    pub first_order: f64,
    pub second_order: f64,
    pub ariu: f64,
    pub discrete_time: f64,
}

impl Bounds {
    fn add(&mut self, other: &Bounds) {
        self.first_order += other.first_order;
        self.second_order += other.second_order;
        self.ariu += other.ariu;
        self.discrete_time += other.discrete_time;
    }

    pub fn clamped(&self) -> Bounds {
        let c = |v: f64| v.clamp(0.0, 1.0);
        Bounds {
            first_order: c(self.first_order),
            second_order: c(self.second_order),
            ariu: c(self.ariu),
            discrete_time: c(self.discrete_time),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PieceRisk {
    pub obstacle: usize,
    pub piece: usize,
    pub segments: Vec<SegmentRisk>,
    pub pairs: Vec<PairRisk>,
    pub bounds: Bounds,
    pub saturated: bool,
}

/// Wall-clock seconds per method. Plane construction is shared and counted
/// in every continuous-time method.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub hyperplanes: f64,
    pub first_order: f64,
    pub second_order: f64,
    pub ariu: f64,
    pub discrete_time: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub pieces: Vec<PieceRisk>,
    /// Summed over pieces, unclamped.
    pub raw: Bounds,
    pub clamped: Bounds,
    pub r_seg: usize,
    pub r_d: usize,
    pub saturated: bool,
    /// Every MVN evaluation met its tolerance.
    pub converged: bool,
    /// Summed MVN error estimates entering the second-order bound.
    pub mvn_err: f64,
    pub discrete_time_method: DiscreteMethod,
    pub discrete_time_description: &'static str,
    pub warnings: Vec<String>,
    pub timings: Timings,
    pub monte_carlo: Option<McEstimate>,
}

/// `aᵀ Σ a`.
fn quad(a: &DVector<f64>, sigma: &nalgebra::DMatrix<f64>) -> f64 {
    a.dot(&(sigma * a))
}

/// Exact crossing probability of segment `j` for the plane `h`.
pub fn segment_risk(
    h: &SeparatingHyperplane,
    j: usize,
    sched: &CovarianceSchedule,
    noise: &NoiseModel,
    traj: &PlannedTrajectory,
) -> SegmentRisk {
    let d = h.clearance;
    let var_s = quad(&h.normal, sched.at_waypoint(j));
    let var_e = var_s + traj.durations()[j] * noise.projected_rate(&h.normal);
    let sigma_e = var_e.sqrt();
    let tail_e = std_normal_sf(d / sigma_e);
    let (p_start, p_cross) = if var_s <= 0.0 {
        (0.0, 2.0 * tail_e)
    } else {
        let sigma_s = var_s.sqrt();
        let both = bivariate_normal_upper(d / sigma_s, d / sigma_e, sigma_s / sigma_e);
        (std_normal_sf(d / sigma_s), (2.0 * (tail_e - both)).max(0.0))
    };
    SegmentRisk {
        index: j,
        clearance: d,
        p: p_start + p_cross,
        p_start,
        p_cross,
        ariu: 2.0 * tail_e,
        saturated: false,
    }
}

/// Reflection bound applied to the full deviation at the segment's end:
/// `2·P(aᵀx_{j+1} ≥ d)`.
pub fn ariu_segment_risk(h: &SeparatingHyperplane, j: usize, sched: &CovarianceSchedule) -> f64 {
    let var_e = quad(&h.normal, sched.at_waypoint(j + 1));
    if var_e <= 0.0 {
        return 0.0;
    }
    2.0 * std_normal_sf(h.clearance / var_e.sqrt())
}

/// Probability that the projected deviation stays below the clearance at
/// every point of `grid`.
fn grid_no_crossing(
    h: &SeparatingHyperplane,
    grid: &SegmentGrid,
    sched: &CovarianceSchedule,
    noise: &NoiseModel,
    opts: &MvnOptions,
) -> Result<(MvnEstimate, bool), GaussianError> {
    let cov = segment_covariance(&h.normal, grid, sched, noise);
    let k = cov.nrows();
    box_probability(cov, vec![h.clearance; k], opts)
}

fn joint_no_crossing(
    planes: [&SeparatingHyperplane; 2],
    grids: [&SegmentGrid; 2],
    sched: &CovarianceSchedule,
    noise: &NoiseModel,
    opts: &MvnOptions,
) -> Result<(MvnEstimate, bool), RiskError> {
    let cov = stacked_covariance(&planes[0].normal, &planes[1].normal, grids[0], grids[1], sched, noise)?;
    let mut upper = vec![planes[0].clearance; grids[0].times().len()];
    upper.extend(std::iter::repeat_n(planes[1].clearance, grids[1].times().len()));
    Ok(box_probability(cov, upper, opts)?)
}

/// `P(X ≤ upper)`; a non-converged estimate is returned with `false`.
fn box_probability(
    cov: nalgebra::DMatrix<f64>,
    upper: Vec<f64>,
    opts: &MvnOptions,
) -> Result<(MvnEstimate, bool), GaussianError> {
    let lower = vec![f64::NEG_INFINITY; upper.len()];
    let g = GaussianVector::new(cov)?;
    match mvn_cdf(&g, &lower, &upper, opts) {
        Ok(e) => Ok((e, true)),
        Err(GaussianError::NotConverged { estimate }) => Ok((estimate, false)),
        Err(e) => Err(e),
    }
}

fn combine_pair(
    index: usize,
    grid_sizes: (usize, usize),
    d_j: (MvnEstimate, bool),
    d_next: (MvnEstimate, bool),
    joint: (MvnEstimate, bool),
) -> PairRisk {
    let raw = 1.0 - d_j.0.prob - d_next.0.prob + joint.0.prob;
    PairRisk {
        index,
        p_lb: raw.max(0.0),
        p_lb_unfloored: raw,
        grid_sizes,
        mvn_err: d_j.0.err + d_next.0.err + joint.0.err,
        converged: d_j.1 && d_next.1 && joint.1,
        skipped: false,
    }
}

/// `p_lb = 1 − P(D_j) − P(D_{j+1}) + P(D_j ∩ D_{j+1})`, where `D_j` is the
/// event that segment `j`'s deviation stays below its clearance at every
/// point of its grid. Equivalently, the probability that both grids see a
/// crossing, which is what [`PairMethod::Recursion`] integrates directly.
pub fn pair_risk_lower_bound(
    j: usize,
    planes: [&SeparatingHyperplane; 2],
    grids: [&SegmentGrid; 2],
    sched: &CovarianceSchedule,
    noise: &NoiseModel,
    method: PairMethod,
    opts: &MvnOptions,
) -> Result<PairRisk, RiskError> {
    if grids[0].segment() != j || grids[1].segment() != j + 1 {
        return Err(ProcessError::InvalidGrid {
            segment: j,
            reason: "pair grids must cover segments j and j + 1",
        }
        .into());
    }
    let sizes = (grids[0].refinement(), grids[1].refinement());
    match method {
        PairMethod::Mvn => {
            let d_j = grid_no_crossing(planes[0], grids[0], sched, noise, opts)?;
            let d_next = grid_no_crossing(planes[1], grids[1], sched, noise, opts)?;
            let joint = joint_no_crossing(planes, grids, sched, noise, opts)?;
            Ok(combine_pair(j, sizes, d_j, d_next, joint))
        }
        PairMethod::Recursion => {
            let (a, b) = (&planes[0].normal, &planes[1].normal);
            let chain = chain::PairChain {
                rate_a: noise.projected_rate(a),
                rate_b: noise.projected_rate(b),
                rate_ab: a.dot(&(noise.matrix() * b)),
                times_a: grids[0].times(),
                times_b: grids[1].times(),
                d_a: planes[0].clearance,
                d_b: planes[1].clearance,
            };
            let coarse = chain.joint_crossing(1.0);
            let fine = chain.joint_crossing(2.0);
            let err = (fine - coarse).abs();
            Ok(PairRisk {
                index: j,
                p_lb: fine.max(0.0),
                p_lb_unfloored: fine,
                grid_sizes: sizes,
                mvn_err: err,
                converged: err <= opts.target_abs_err,
                skipped: false,
            })
        }
    }
}

/// `Σ_j p_j`.
pub fn first_order_bound(segments: &[SegmentRisk]) -> f64 {
    segments.iter().map(|s| s.p).sum()
}

/// `Σ_j p_j − Σ_j p_lb_{j,j+1}`.
pub fn second_order_bound(segments: &[SegmentRisk], pairs: &[PairRisk]) -> f64 {
    first_order_bound(segments) - pairs.iter().map(|p| p.p_lb).sum::<f64>()
}

/// `Σ_j ariu_j`.
pub fn ariu_bound(segments: &[SegmentRisk]) -> f64 {
    segments.iter().map(|s| s.ariu).sum()
}

/// Boole bound over the `r_d` substeps of every segment for one piece, given
/// that piece's plane per segment (`None` for a saturated segment).
pub fn piece_discrete_time_bound(
    traj: &PlannedTrajectory,
    sched: &CovarianceSchedule,
    noise: &NoiseModel,
    planes: &[Option<SeparatingHyperplane>],
    r_d: usize,
) -> f64 {
    assert!(r_d >= 1, "r_d must be at least 1");
    assert_eq!(planes.len(), traj.num_segments());
    let step = |j: usize, i: usize| -> f64 {
        let Some(h) = &planes[j] else { return 1.0 };
        let t = if i == r_d {
            traj.times()[j + 1]
        } else {
            traj.times()[j] + traj.durations()[j] * i as f64 / r_d as f64
        };
        let margin = h.margin(&traj.position_on_segment(j, t));
        let var = sched.projected_variance(traj, noise, j, &h.normal, t);
        if var <= 0.0 {
            return if margin > 0.0 { 0.0 } else { 1.0 };
        }
        std_normal_sf(margin / var.sqrt())
    };
    let n = traj.num_segments();
    let mut total = step(0, 0) + step(n - 1, r_d);
    for j in 0..n {
        total += (1..r_d).map(|i| step(j, i)).sum::<f64>();
        if j + 1 < n {
            total += step(j, r_d).min(step(j + 1, 0));
        }
    }
    total
}

/// Boole bound over the distinct substep times of the whole trajectory for
/// one piece, each term the Gaussian mass of the piece at that time. Pieces
/// without an exact mass use the segment plane of `planes`.
pub fn piece_point_mass_bound(
    traj: &PlannedTrajectory,
    sched: &CovarianceSchedule,
    noise: &NoiseModel,
    shape: &ConvexShape,
    planes: &[Option<SeparatingHyperplane>],
    r_d: usize,
) -> f64 {
    assert!(r_d >= 1, "r_d must be at least 1");
    if !point_mass::supported(shape) {
        return piece_discrete_time_bound(traj, sched, noise, planes, r_d);
    }
    let mut total = f64::from(shape.contains(&traj.waypoints()[0]));
    for j in 0..traj.num_segments() {
        for i in 1..=r_d {
            let t = if i == r_d {
                traj.times()[j + 1]
            } else {
                traj.times()[j] + traj.durations()[j] * i as f64 / r_d as f64
            };
            let mean = traj.position_on_segment(j, t);
            let cov = sched.on_segment(traj, noise, j, t);
            total += point_mass::point_mass(shape, &mean, &cov).expect("supported piece");
        }
    }
    total
}

/// Planes for every (piece, segment); `None` marks contact.
type PlaneTable = Vec<Vec<Option<SeparatingHyperplane>>>;

fn build_planes(traj: &PlannedTrajectory, workspace: &Workspace) -> Result<PlaneTable, RiskError> {
    let segments: Vec<_> = (0..traj.num_segments()).map(|j| traj.segment(j)).collect();
    let pieces: Vec<_> = workspace.pieces().map(|(_, s)| s).collect();
    pieces
        .par_iter()
        .map(|shape| {
            segments
                .iter()
                .map(|seg| match separating_hyperplane(seg, shape) {
                    Ok(h) => Ok(Some(h)),
                    Err(GeometryError::ZeroClearance { .. }) => Ok(None),
                    Err(e) => Err(RiskError::from(e)),
                })
                .collect()
        })
        .collect()
}

fn check_dims(traj: &PlannedTrajectory, noise: &NoiseModel, workspace: &Workspace) -> Result<(), RiskError> {
    let mismatch = |piece| RiskError::DimensionMismatch {
        trajectory: traj.dim(),
        noise: noise.dim(),
        piece,
    };
    if traj.dim() != noise.dim() {
        return Err(mismatch(None));
    }
    match workspace.pieces().position(|(_, s)| s.dim() != traj.dim()) {
        Some(p) => Err(mismatch(Some(p))),
        None => Ok(()),
    }
}

/// Boole bound over `r_d` substeps per segment, summed over all pieces.
pub fn discrete_time_bound(
    traj: &PlannedTrajectory,
    noise: &NoiseModel,
    workspace: &Workspace,
    r_d: usize,
    method: DiscreteMethod,
) -> Result<f64, RiskError> {
    check_dims(traj, noise, workspace)?;
    let sched = propagate_covariance(traj, noise);
    let planes = build_planes(traj, workspace)?;
    let shapes: Vec<&ConvexShape> = workspace.pieces().map(|(_, s)| s).collect();
    Ok(planes
        .iter()
        .zip(shapes)
        .map(|(p, shape)| piece_discrete(traj, &sched, noise, shape, p, r_d, method))
        .sum())
}

fn piece_discrete(
    traj: &PlannedTrajectory,
    sched: &CovarianceSchedule,
    noise: &NoiseModel,
    shape: &ConvexShape,
    planes: &[Option<SeparatingHyperplane>],
    r_d: usize,
    method: DiscreteMethod,
) -> f64 {
    match method {
        DiscreteMethod::PointMass => piece_point_mass_bound(traj, sched, noise, shape, planes, r_d),
        DiscreteMethod::SegmentPlane => piece_discrete_time_bound(traj, sched, noise, planes, r_d),
    }
}

/// Every bound for every piece, aggregated by summation over pieces.
pub fn total_risk(
    workspace: &Workspace,
    traj: &PlannedTrajectory,
    noise: &NoiseModel,
    config: &RiskConfig,
) -> Result<RiskReport, RiskError> {
    check_dims(traj, noise, workspace)?;
    assert!(config.r_seg >= 1 && config.r_d >= 1, "refinements must be at least 1");
    crate::in_pool(config.threads, || total_risk_inner(workspace, traj, noise, config))
}

fn total_risk_inner(
    workspace: &Workspace,
    traj: &PlannedTrajectory,
    noise: &NoiseModel,
    config: &RiskConfig,
) -> Result<RiskReport, RiskError> {
    let started = Instant::now();
    let n = traj.num_segments();
    let sched = propagate_covariance(traj, noise);
    let ids: Vec<PieceId> = workspace.pieces().map(|(id, _)| id).collect();

    let clock = Instant::now();
    let planes = build_planes(traj, workspace)?;
    let t_planes = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let segments: Vec<Vec<SegmentRisk>> = planes
        .par_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, h)| match h {
                    Some(h) => segment_risk(h, j, &sched, noise, traj),
                    None => SegmentRisk::saturated(j),
                })
                .collect()
        })
        .collect();
    let t_first = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let ariu: Vec<Vec<f64>> = planes
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, h)| h.as_ref().map_or(1.0, |h| ariu_segment_risk(h, j, &sched)))
                .collect()
        })
        .collect();
    let t_ariu = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let grids = (0..n)
        .map(|j| SegmentGrid::uniform(traj, j, config.r_seg))
        .collect::<Result<Vec<_>, _>>()?;
    let tol = config.mvn.target_abs_err;
    let sizes = (config.r_seg, config.r_seg);
    // A pair is evaluated only if both marginals can exceed the MVN tolerance.
    let needed = |m: usize, j: usize| {
        let (a, b) = (&segments[m][j], &segments[m][j + 1]);
        !a.saturated && !b.saturated && a.p.min(b.p) > tol
    };
    let pair_jobs: Vec<(usize, usize)> = (0..planes.len())
        .flat_map(|m| (0..n.saturating_sub(1)).map(move |j| (m, j)))
        .collect();
    let mut warnings = Vec::new();
    let pair_results: Vec<Result<PairRisk, RiskError>> = pair_jobs
        .par_iter()
        .map(|&(m, j)| {
            if !needed(m, j) {
                return Ok(PairRisk::skipped(j, sizes));
            }
            let hs = [planes[m][j].as_ref().unwrap(), planes[m][j + 1].as_ref().unwrap()];
            pair_risk_lower_bound(
                j,
                hs,
                [&grids[j], &grids[j + 1]],
                &sched,
                noise,
                config.pair_method,
                &config.mvn,
            )
        })
        .collect();
    let mut pairs: Vec<Vec<PairRisk>> = vec![Vec::with_capacity(n.saturating_sub(1)); planes.len()];
    for (&(m, j), result) in pair_jobs.iter().zip(pair_results) {
        let pair = result.unwrap_or_else(|e| {
            warnings.push(format!(
                "obstacle {} piece {}: pair ({j}, {}) fell back to p_lb = 0: {e}",
                ids[m].obstacle,
                ids[m].piece,
                j + 1
            ));
            PairRisk::skipped(j, sizes)
        });
        pairs[m].push(pair);
    }
    let t_pairs = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let shapes: Vec<&ConvexShape> = workspace.pieces().map(|(_, s)| s).collect();
    let discrete: Vec<f64> = planes
        .par_iter()
        .zip(shapes)
        .map(|(row, shape)| piece_discrete(traj, &sched, noise, shape, row, config.r_d, config.discrete_method))
        .collect();
    let t_discrete = clock.elapsed().as_secs_f64();

    let mut pieces = Vec::with_capacity(planes.len());
    let mut raw = Bounds::default();
    let mut converged = true;
    let mut mvn_err = 0.0;
    for (m, (segs, prs)) in segments.into_iter().zip(pairs).enumerate() {
        let saturated = segs.iter().any(|s| s.saturated);
        if saturated {
            warnings.push(format!(
                "obstacle {} piece {}: zero clearance, affected segments saturated at 1",
                ids[m].obstacle, ids[m].piece
            ));
        }
        for p in prs.iter().filter(|p| !p.converged) {
            converged = false;
            warnings.push(format!(
                "obstacle {} piece {}: MVN tolerance not met for pair ({}, {}), err {:.2e}",
                ids[m].obstacle,
                ids[m].piece,
                p.index,
                p.index + 1,
                p.mvn_err
            ));
        }
        mvn_err += prs.iter().map(|p| p.mvn_err).sum::<f64>();
        let bounds = Bounds {
            first_order: first_order_bound(&segs),
            second_order: second_order_bound(&segs, &prs),
            ariu: ariu[m].iter().sum(),
            discrete_time: discrete[m],
        };
        raw.add(&bounds);
        pieces.push(PieceRisk {
            obstacle: ids[m].obstacle,
            piece: ids[m].piece,
            segments: segs,
            pairs: prs,
            bounds,
            saturated,
        });
    }

    Ok(RiskReport {
        saturated: pieces.iter().any(|p| p.saturated),
        pieces,
        clamped: raw.clamped(),
        raw,
        r_seg: config.r_seg,
        r_d: config.r_d,
        converged,
        mvn_err,
        discrete_time_method: config.discrete_method,
        discrete_time_description: config.discrete_method.description(),
        warnings,
        timings: Timings {
            hyperplanes: t_planes,
            first_order: t_planes + t_first,
            second_order: t_planes + t_first + t_pairs,
            ariu: t_planes + t_ariu,
            discrete_time: t_planes + t_discrete,
            total: started.elapsed().as_secs_f64(),
        },
        monte_carlo: None,
    })
}
