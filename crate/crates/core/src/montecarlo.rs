//! Euler–Maruyama simulation of the tracked robot and empirical collision
//! frequencies.
//!
//! Path `k` draws from ChaCha8 stream `k` of the configured seed, so every
//! path is reproducible on its own and results do not depend on how paths are
//! split across threads. Increments are `L·z·√δt` with `L` the lower Cholesky
//! factor of `R` and `z` drawn from `rand_distr::StandardNormal` (ziggurat).

use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{ConvexShape, Workspace};
use crate::process::{NoiseModel, PlannedTrajectory};

/// Paths are scheduled in fixed-size chunks regardless of the thread count.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub paths: usize,
    /// Euler–Maruyama substeps per segment.
    pub r_d: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            r_d: 100,
            seed: 0x5eed_b415,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub paths: usize,
    pub hits: usize,
    pub r_d: usize,
    pub seed: u64,
    pub elapsed_secs: f64,
    /// How a sampled state is judged to be in collision.
    pub membership: &'static str,
}

impl McEstimate {
    fn from_hits(hits: usize, cfg: &SimulationConfig, elapsed_secs: f64, membership: &'static str) -> Self {
        let p_hat = hits as f64 / cfg.paths as f64;
        Self {
            p_hat,
            stderr: binomial_stderr(p_hat, cfg.paths),
            paths: cfg.paths,
            hits,
            r_d: cfg.r_d,
            seed: cfg.seed,
            elapsed_secs,
            membership,
        }
    }
}

/// `√(p(1 − p)/n)`.
pub fn binomial_stderr(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Streaming path generator; see [`simulate_paths`].
#[derive(Debug, Clone)]
pub struct PathSampler<'a> {
    traj: &'a PlannedTrajectory,
    chol: Vec<f64>,
    r_d: usize,
    seed: u64,
}

/// Creates a sampler whose paths are produced one state at a time.
///
/// Path `k` starts exactly at the first waypoint and follows
/// `x_{i+1} = x_i + v_j·δt + n_i`, `n_i ~ N(0, δt·R)`, `δt = Δt_j / r_d`.
pub fn simulate_paths<'a>(traj: &'a PlannedTrajectory, noise: &NoiseModel, cfg: &SimulationConfig) -> PathSampler<'a> {
    assert!(cfg.r_d >= 1, "r_d must be at least 1");
    assert_eq!(traj.dim(), noise.dim(), "noise dimension must match the trajectory");
    let l = noise.cholesky_factor();
    let n = l.nrows();
    PathSampler {
        traj,
        chol: (0..n * n).map(|i| l[(i / n, i % n)]).collect(),
        r_d: cfg.r_d,
        seed: cfg.seed,
    }
}

impl<'a> PathSampler<'a> {
    pub fn path(&self, k: u64) -> SamplePath<'_> {
        let n = self.traj.dim();
        SamplePath {
            sampler: self,
            rng: path_rng(self.seed, k),
            segment: 0,
            step: 0,
            started: false,
            deviation: vec![0.0; n],
            position: self.traj.waypoints()[0].iter().copied().collect(),
            z: vec![0.0; n],
        }
    }

    pub fn r_d(&self) -> usize {
        self.r_d
    }

    /// Number of states per path, including the start.
    pub fn states_per_path(&self) -> usize {
        self.traj.num_segments() * self.r_d + 1
    }
}

/// One sampled path, advanced with [`SamplePath::advance`].
///
/// The deviation from the plan is accumulated separately so the planned part
/// of each state is exact rather than a running sum of `v·δt`.
#[derive(Debug, Clone)]
pub struct SamplePath<'s> {
    sampler: &'s PathSampler<'s>,
    rng: ChaCha8Rng,
    segment: usize,
    step: usize,
    started: bool,
    deviation: Vec<f64>,
    position: Vec<f64>,
    z: Vec<f64>,
}

impl SamplePath<'_> {
    /// Next state `(t, x(t))`; the first call returns the start.
    pub fn advance(&mut self) -> Option<(f64, &[f64])> {
        let traj = self.sampler.traj;
        let r_d = self.sampler.r_d;
        if !self.started {
            self.started = true;
            return Some((0.0, &self.position));
        }
        if self.segment == traj.num_segments() {
            return None;
        }
        let n = self.deviation.len();
        let dt = traj.durations()[self.segment] / r_d as f64;
        let scale = dt.sqrt();
        for zi in self.z.iter_mut() {
            *zi = StandardNormal.sample(&mut self.rng);
        }
        let chol = &self.sampler.chol;
        for r in 0..n {
            let mut inc = 0.0;
            for c in 0..=r {
                inc += chol[r * n + c] * self.z[c];
            }
            self.deviation[r] += inc * scale;
        }
        self.step += 1;
        let j = self.segment;
        let s = self.step as f64 / r_d as f64;
        let (a, b) = (&traj.waypoints()[j], &traj.waypoints()[j + 1]);
        for r in 0..n {
            self.position[r] = a[r] + (b[r] - a[r]) * s + self.deviation[r];
        }
        let t = if self.step == r_d {
            traj.times()[j + 1]
        } else {
            traj.times()[j] + traj.durations()[j] * s
        };
        if self.step == r_d {
            self.segment += 1;
            self.step = 0;
        }
        Some((t, &self.position))
    }

    /// Current deviation `x(t) − x^plan(t)`.
    pub fn deviation(&self) -> &[f64] {
        &self.deviation
    }
}

/// Flattened membership tests with an axis-aligned bounding-box prefilter.
#[derive(Debug, Clone)]
enum Piece {
    Polygon {
        lo: [f64; 2],
        hi: [f64; 2],
        edges: Vec<[f64; 3]>,
    },
    Ball {
        center: Vec<f64>,
        r2: f64,
    },
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    General {
        lo: Vec<f64>,
        hi: Vec<f64>,
        shape: ConvexShape,
    },
}

impl Piece {
    fn new(shape: &ConvexShape) -> Self {
        match shape {
            ConvexShape::Polytope(p) if p.edges().is_some() => {
                let (lo, hi) = shape.bounding_box().expect("bounded");
                Piece::Polygon {
                    lo: [lo[0], lo[1]],
                    hi: [hi[0], hi[1]],
                    edges: p.edges().unwrap().to_vec(),
                }
            }
            ConvexShape::Ball(b) => Piece::Ball {
                center: b.center.iter().copied().collect(),
                r2: b.radius * b.radius,
            },
            ConvexShape::Halfspace(h) => Piece::Halfspace {
                normal: h.normal.iter().copied().collect(),
                offset: h.offset,
            },
            _ => {
                let (lo, hi) = shape.bounding_box().expect("bounded");
                Piece::General {
                    lo: lo.iter().copied().collect(),
                    hi: hi.iter().copied().collect(),
                    shape: shape.clone(),
                }
            }
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Piece::Polygon { lo, hi, edges } => {
                x[0] >= lo[0]
                    && x[0] <= hi[0]
                    && x[1] >= lo[1]
                    && x[1] <= hi[1]
                    && edges.iter().all(|e| e[0] * x[0] + e[1] * x[1] <= e[2])
            }
            Piece::Ball { center, r2 } => center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum::<f64>() <= *r2,
            Piece::Halfspace { normal, offset } => normal.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() >= *offset,
            Piece::General { lo, hi, shape } => {
                x.iter().zip(lo).all(|(v, l)| v >= l)
                    && x.iter().zip(hi).all(|(v, h)| v <= h)
                    && shape.contains(&DVector::from_column_slice(x))
            }
        }
    }
}

fn compile(workspace: &Workspace) -> Vec<Piece> {
    workspace.pieces().map(|(_, s)| Piece::new(s)).collect()
}

/// Per-path collision indicators; `true` when any sampled state of the path,
/// including the start, lies in an obstacle.
pub fn collision_indicators(
    traj: &PlannedTrajectory,
    noise: &NoiseModel,
    workspace: &Workspace,
    cfg: &SimulationConfig,
) -> Vec<bool> {
    let sampler = simulate_paths(traj, noise, cfg);
    let pieces = compile(workspace);
    let chunks = cfg.paths.div_ceil(CHUNK);
    crate::in_pool(cfg.threads, || {
        (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let (sampler, pieces) = (&sampler, &pieces);
                let end = ((c + 1) * CHUNK).min(cfg.paths);
                (c * CHUNK..end).map(move |k| {
                    let mut path = sampler.path(k as u64);
                    while let Some((_, x)) = path.advance() {
                        if pieces.iter().any(|p| p.contains(x)) {
                            return true;
                        }
                    }
                    false
                })
            })
            .collect()
    })
}

/// Fraction of simulated paths that visit an obstacle at some substep.
pub fn estimate_risk(
    traj: &PlannedTrajectory,
    noise: &NoiseModel,
    workspace: &Workspace,
    cfg: &SimulationConfig,
) -> McEstimate {
    assert!(cfg.paths >= 1, "at least one path is required");
    let start = Instant::now();
    let hits = if workspace.is_empty() {
        0
    } else {
        collision_indicators(traj, noise, workspace, cfg)
            .into_iter()
            .filter(|&h| h)
            .count()
    };
    McEstimate::from_hits(
        hits,
        cfg,
        start.elapsed().as_secs_f64(),
        "exact point-in-piece on the substep grid",
    )
}

/// Fraction of 1-D Brownian paths with variance rate `sigma2` whose running
/// maximum over `cfg.r_d` equal steps of `[0, t]` reaches `d`.
pub fn brownian_sup_check(d: f64, t: f64, sigma2: f64, cfg: &SimulationConfig) -> McEstimate {
    assert!(t > 0.0 && sigma2 >= 0.0 && cfg.r_d >= 1 && cfg.paths >= 1);
    let start = Instant::now();
    let scale = (sigma2 * t / cfg.r_d as f64).sqrt();
    let chunks = cfg.paths.div_ceil(CHUNK);
    let hits: usize = crate::in_pool(cfg.threads, || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let end = ((c + 1) * CHUNK).min(cfg.paths);
                (c * CHUNK..end)
                    .filter(|&k| {
                        if d <= 0.0 {
                            return true;
                        }
                        let mut rng = path_rng(cfg.seed, k as u64);
                        let mut w = 0.0;
                        for _ in 0..cfg.r_d {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            w += scale * z;
                            if w >= d {
                                return true;
                            }
                        }
                        false
                    })
                    .count()
            })
            .sum()
    });
    McEstimate::from_hits(
        hits,
        cfg,
        start.elapsed().as_secs_f64(),
        "running maximum on the substep grid",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::std_normal_sf;
    use crate::geometry::Obstacle;
    use crate::process::Timing;

    fn line(len: f64) -> PlannedTrajectory {
        PlannedTrajectory::new(
            vec![DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![len, 0.0])],
            Timing::Speed(1.0),
        )
        .unwrap()
    }

    fn cfg(paths: usize, r_d: usize) -> SimulationConfig {
        SimulationConfig {
            paths,
            r_d,
            seed: 7,
            threads: None,
        }
    }

    #[test]
    fn noiseless_path_tracks_the_plan() {
        let traj = PlannedTrajectory::new(
            vec![
                DVector::from_vec(vec![0.0, 0.0]),
                DVector::from_vec(vec![1.0, 0.0]),
                DVector::from_vec(vec![1.0, 2.0]),
            ],
            Timing::Speed(1.0),
        )
        .unwrap();
        let noise = NoiseModel::isotropic(2, 1e-18).unwrap();
        let sampler = simulate_paths(&traj, &noise, &cfg(1, 10));
        let mut path = sampler.path(0);
        let mut last = (0.0, vec![]);
        let mut count = 0;
        while let Some((t, x)) = path.advance() {
            last = (t, x.to_vec());
            count += 1;
        }
        assert_eq!(count, sampler.states_per_path());
        assert_eq!(last.0, 3.0);
        assert!((last.1[0] - 1.0).abs() < 1e-8 && (last.1[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn empty_and_engulfing_workspaces() {
        let traj = line(1.0);
        let noise = NoiseModel::isotropic(2, 1e-3).unwrap();
        assert_eq!(
            estimate_risk(&traj, &noise, &Workspace::empty(), &cfg(100, 10)).p_hat,
            0.0
        );
        let big = Obstacle::convex(ConvexShape::ball(DVector::from_vec(vec![0.0, 0.0]), 0.5).unwrap());
        let est = estimate_risk(&traj, &noise, &Workspace::new(vec![big]), &cfg(100, 10));
        assert_eq!(est.p_hat, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn same_seed_same_indicators_across_thread_counts() {
        let traj = line(1.0);
        let noise = NoiseModel::isotropic(2, 1e-3).unwrap();
        let h = ConvexShape::halfspace(DVector::from_vec(vec![0.0, 1.0]), 0.05).unwrap();
        let ws = Workspace::new(vec![Obstacle::convex(h)]);
        let base = collision_indicators(&traj, &noise, &ws, &cfg(5000, 20));
        for threads in [1, 4] {
            let c = SimulationConfig {
                threads: Some(threads),
                ..cfg(5000, 20)
            };
            assert_eq!(collision_indicators(&traj, &noise, &ws, &c), base);
        }
        assert!(base.iter().any(|&b| b) && !base.iter().all(|&b| b));
    }

    #[test]
    fn sup_check_limits() {
        assert_eq!(brownian_sup_check(0.0, 1.0, 1.0, &cfg(1000, 50)).p_hat, 1.0);
        assert_eq!(brownian_sup_check(8.0, 1.0, 1.0, &cfg(1000, 50)).p_hat, 0.0);
    }

    #[test]
    fn sup_check_matches_reflection() {
        let est = brownian_sup_check(1.0, 1.0, 1.0, &cfg(20_000, 2000));
        let want = 2.0 * std_normal_sf(1.0);
        assert!(
            (est.p_hat - want).abs() < 3.0 * est.stderr + 0.01,
            "{} vs {want}",
            est.p_hat
        );
    }
}
