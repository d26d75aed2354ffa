//! Random scenario generator and the method-versus-Monte-Carlo benchmark.
//!
//! Generator distribution, all in the unit box:
//! - obstacle count uniform in `2..=6`, centres uniform in `[0.1, 0.9]²`;
//! - with probability 1/4 an obstacle is an axis-aligned box with half-sides
//!   uniform in `[0.04, 0.12]`, otherwise a convex polygon whose vertex count
//!   is uniform in `3..=8`, with vertices at sorted uniform angles (no gap
//!   below 0.15 rad or above 0.9π) on a circle of radius uniform in
//!   `[0.05, 0.15]`;
//! - waypoint count uniform in `4..=12`; each waypoint is drawn at a heading
//!   within `max_turn` of the previous one (any heading by default) and a
//!   step length uniform in `[0.2, 0.5]`, and rejected unless it stays
//!   inside the box and the new segment keeps `min_clearance = 0.02` from
//!   every obstacle;
//! - `R = 10⁻³·I`, unit speed.
//!
//! Scenario `i` of a run seeded with `seed` is drawn from the ChaCha8 stream
//! `i` of that seed, so any scenario can be regenerated on its own.

use std::f64::consts::TAU;
use std::time::Instant;

use brisk_core::geometry::{min_distance, Segment, Workspace};
use brisk_core::montecarlo::{estimate_risk, McEstimate};
use brisk_core::risk::{discrete_time_bound, total_risk, DiscreteMethod, RiskReport};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{risk_config, simulation_config};
use crate::scenario::{BoxRegion, EstimatorSpec, NoiseSpec, ObstacleSpec, Point, Scenario, ScenarioFile, SCHEMA};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorConfig {
    pub obstacles: (usize, usize),
    pub vertices: (usize, usize),
    pub waypoints: (usize, usize),
    pub radius: (f64, f64),
    pub step: (f64, f64),
    pub min_clearance: f64,
    /// Extra clearance in deviations of the tracking error at the end of the
    /// segment: `d ≥ k·√(σ²·t)`.
    pub clearance_sigmas: f64,
    /// Largest heading change between consecutive segments, radians.
    pub max_turn: f64,
    pub box_probability: f64,
    pub noise: f64,
    /// Draws per waypoint before the chain is restarted.
    pub waypoint_attempts: usize,
    /// Chain restarts before the obstacles are redrawn.
    pub chain_attempts: usize,
    /// Obstacle redraws before giving up.
    pub layout_attempts: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            obstacles: (2, 6),
            vertices: (3, 8),
            waypoints: (4, 12),
            radius: (0.05, 0.15),
            step: (0.2, 0.5),
            min_clearance: 0.02,
            clearance_sigmas: 0.0,
            max_turn: std::f64::consts::PI,
            box_probability: 0.25,
            noise: 1e-3,
            waypoint_attempts: 200,
            chain_attempts: 50,
            layout_attempts: 100,
        }
    }
}

/// ChaCha8 stream `index` of `seed`.
pub fn scenario_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn random_obstacle(rng: &mut impl Rng, cfg: &GeneratorConfig) -> ObstacleSpec {
    let c: Point = [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)];
    if rng.random_bool(cfg.box_probability) {
        let hw = rng.random_range(cfg.radius.0..cfg.radius.1) * 0.8;
        let hh = rng.random_range(cfg.radius.0..cfg.radius.1) * 0.8;
        return ObstacleSpec::Box {
            min: [c[0] - hw, c[1] - hh],
            max: [c[0] + hw, c[1] + hh],
        };
    }
    let n = rng.random_range(cfg.vertices.0..=cfg.vertices.1);
    let r = rng.random_range(cfg.radius.0..cfg.radius.1);
    loop {
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        angles.sort_by(f64::total_cmp);
        // Reject slivers: every vertex must subtend a visible angle and the
        // polygon must wrap around its centre.
        let min_gap = angles
            .windows(2)
            .map(|w| w[1] - w[0])
            .chain([angles[0] + TAU - angles[n - 1]])
            .fold(f64::INFINITY, f64::min);
        let max_gap = angles
            .windows(2)
            .map(|w| w[1] - w[0])
            .chain([angles[0] + TAU - angles[n - 1]])
            .fold(0.0, f64::max);
        if min_gap < 0.15 || max_gap > 0.9 * std::f64::consts::PI {
            continue;
        }
        let vertices = angles
            .iter()
            .map(|a| [c[0] + r * a.cos(), c[1] + r * a.sin()])
            .collect();
        return ObstacleSpec::Polygon {
            vertices,
            convex_pieces: None,
        };
    }
}

fn clearance(ws: &Workspace, a: Point, b: Point) -> f64 {
    let seg = Segment::new(DVector::from_column_slice(&a), DVector::from_column_slice(&b)).expect("distinct points");
    ws.pieces()
        .map(|(_, s)| min_distance(&seg, s).map_or(0.0, |c| c.distance))
        .fold(f64::INFINITY, f64::min)
}

fn inside(p: Point, margin: f64) -> bool {
    p.iter().all(|&v| v >= margin && v <= 1.0 - margin)
}

fn random_chain(rng: &mut impl Rng, ws: &Workspace, cfg: &GeneratorConfig) -> Option<Vec<Point>> {
    let n = rng.random_range(cfg.waypoints.0..=cfg.waypoints.1);
    'chain: for _ in 0..cfg.chain_attempts {
        let start: Point = [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)];
        if ws.contains(&DVector::from_column_slice(&start)) {
            continue;
        }
        let mut chain = vec![start];
        let mut heading = rng.random_range(0.0..TAU);
        let mut elapsed = 0.0;
        while chain.len() < n {
            let last = *chain.last().unwrap();
            let first = chain.len() == 1;
            let found = (0..cfg.waypoint_attempts).find_map(|_| {
                let h = if first {
                    rng.random_range(0.0..TAU)
                } else {
                    heading + rng.random_range(-cfg.max_turn..=cfg.max_turn)
                };
                let len = rng.random_range(cfg.step.0..cfg.step.1);
                let next = [last[0] + len * h.cos(), last[1] + len * h.sin()];
                let need = cfg
                    .min_clearance
                    .max(cfg.clearance_sigmas * (cfg.noise * (elapsed + len)).sqrt());
                (inside(next, 0.02) && clearance(ws, last, next) >= need).then_some((next, h, len))
            });
            match found {
                Some((p, h, len)) => {
                    chain.push(p);
                    heading = h;
                    elapsed += len;
                }
                None => continue 'chain,
            }
        }
        return Some(chain);
    }
    None
}

/// Draws one collision-free scenario.
pub fn generate_scenario(
    rng: &mut impl Rng,
    cfg: &GeneratorConfig,
    estimator: &EstimatorSpec,
) -> Result<ScenarioFile, CliError> {
    for _ in 0..cfg.layout_attempts {
        let count = rng.random_range(cfg.obstacles.0..=cfg.obstacles.1);
        let obstacles: Vec<ObstacleSpec> = (0..count).map(|_| random_obstacle(rng, cfg)).collect();
        let mut file = ScenarioFile {
            version: SCHEMA.to_string(),
            workspace: BoxRegion {
                min: [0.0, 0.0],
                max: [1.0, 1.0],
            },
            obstacles,
            goal: None,
            waypoints: Vec::new(),
            noise: NoiseSpec::Scalar(cfg.noise),
            speed: Some(1.0),
            durations: None,
            estimator: estimator.clone(),
        };
        let ws = Scenario::obstacles_of(&file)?;
        if let Some(chain) = random_chain(rng, &ws, cfg) {
            file.waypoints = chain;
            return Ok(file);
        }
    }
    Err(CliError::Generator(format!(
        "no collision-free waypoint chain after {} obstacle layouts",
        cfg.layout_attempts
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub count: usize,
    pub seed: u64,
    /// Discrete-time rates.
    pub rates: Vec<usize>,
    pub estimator: EstimatorSpec,
    pub generator: GeneratorConfig,
}

/// One estimate of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub method: String,
    pub value: f64,
    pub time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub index: usize,
    pub segments: usize,
    pub pieces: usize,
    pub monte_carlo: McEstimate,
    pub estimates: Vec<Estimate>,
    pub converged: bool,
    pub saturated: bool,
    #[serde(skip)]
    pub scenario: ScenarioFile,
    #[serde(skip)]
    pub report: RiskReport,
}

impl ScenarioResult {
    pub fn value(&self, method: &str) -> Option<f64> {
        self.estimates.iter().find(|e| e.method == method).map(|e| e.value)
    }
}

/// Table 1's statistics for one method against Monte Carlo.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodStats {
    pub method: String,
    /// Mean of `value − p̂`.
    pub bias: f64,
    pub rmse: f64,
    /// Share of scenarios, in percent, with `value ≥ p̂ − 3·stderr`.
    pub pct_conservative: f64,
    pub avg_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub summary: Vec<MethodStats>,
    pub scenarios: Vec<ScenarioResult>,
}

pub fn discrete_name(r_d: usize) -> String {
    format!("discrete_time_rd{r_d}")
}

/// Runs every estimator on one generated scenario.
pub fn evaluate(index: usize, file: ScenarioFile, rates: &[usize]) -> Result<ScenarioResult, CliError> {
    let sc = Scenario::from_file(file)?;
    let report = total_risk(&sc.workspace, &sc.trajectory, &sc.noise, &risk_config(&sc.file))?;
    let t = report.timings;
    let mut estimates = vec![
        Estimate {
            method: "first_order".into(),
            value: report.raw.first_order,
            time_s: t.hyperplanes + t.first_order,
        },
        Estimate {
            method: "second_order".into(),
            value: report.raw.second_order,
            time_s: t.hyperplanes + t.first_order + t.second_order,
        },
        Estimate {
            method: "ariu".into(),
            value: report.raw.ariu,
            time_s: t.hyperplanes + t.ariu,
        },
    ];
    for &r_d in rates {
        let clock = Instant::now();
        let value = discrete_time_bound(&sc.trajectory, &sc.noise, &sc.workspace, r_d, DiscreteMethod::PointMass)?;
        estimates.push(Estimate {
            method: discrete_name(r_d),
            value,
            time_s: clock.elapsed().as_secs_f64(),
        });
    }
    let mc = estimate_risk(&sc.trajectory, &sc.noise, &sc.workspace, &simulation_config(&sc.file));
    Ok(ScenarioResult {
        index,
        segments: sc.trajectory.num_segments(),
        pieces: sc.workspace.num_pieces(),
        monte_carlo: mc,
        estimates,
        converged: report.converged,
        saturated: report.saturated,
        scenario: sc.file,
        report,
    })
}

/// Generates `count` scenarios and evaluates them concurrently. Scenario `i`
/// uses generator stream `i` and a Monte Carlo seed drawn from it.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchResult, CliError> {
    if cfg.count == 0 {
        return Err(CliError::Usage("bench needs at least one scenario".into()));
    }
    if cfg.estimator.mc_paths == 0 {
        return Err(CliError::Usage("bench needs Monte Carlo paths as the reference".into()));
    }
    let files = (0..cfg.count)
        .map(|i| {
            let mut rng = scenario_rng(cfg.seed, i as u64);
            let mut est = cfg.estimator.clone();
            est.seed = rng.random();
            generate_scenario(&mut rng, &cfg.generator, &est)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let scenarios = files
        .into_par_iter()
        .enumerate()
        .map(|(i, f)| evaluate(i, f, &cfg.rates))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BenchResult {
        config: cfg.clone(),
        summary: summarize(&scenarios),
        scenarios,
    })
}

pub fn summarize(results: &[ScenarioResult]) -> Vec<MethodStats> {
    let Some(first) = results.first() else {
        return Vec::new();
    };
    let n = results.len() as f64;
    let mut stats: Vec<MethodStats> = first
        .estimates
        .iter()
        .map(|e| {
            let (mut bias, mut sq, mut ok, mut time) = (0.0, 0.0, 0usize, 0.0);
            for r in results {
                let est = r
                    .estimates
                    .iter()
                    .find(|x| x.method == e.method)
                    .expect("same methods in every scenario");
                let diff = est.value - r.monte_carlo.p_hat;
                bias += diff;
                sq += diff * diff;
                ok += usize::from(est.value >= r.monte_carlo.p_hat - 3.0 * r.monte_carlo.stderr);
                time += est.time_s;
            }
            MethodStats {
                method: e.method.clone(),
                bias: bias / n,
                rmse: (sq / n).sqrt(),
                pct_conservative: 100.0 * ok as f64 / n,
                avg_time_s: time / n,
            }
        })
        .collect();
    stats.push(MethodStats {
        method: "monte_carlo".into(),
        bias: 0.0,
        rmse: 0.0,
        pct_conservative: 100.0,
        avg_time_s: results.iter().map(|r| r.monte_carlo.elapsed_secs).sum::<f64>() / n,
    });
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_scenarios_are_valid_and_collision_free() {
        let cfg = GeneratorConfig::default();
        for i in 0..20 {
            let mut rng = scenario_rng(7, i);
            let file = generate_scenario(&mut rng, &cfg, &EstimatorSpec::default()).unwrap();
            let n = file.obstacles.len();
            assert!((2..=6).contains(&n));
            assert!((4..=12).contains(&file.waypoints.len()));
            let sc = Scenario::from_file(file.clone()).unwrap();
            for w in file.waypoints.windows(2) {
                assert!(clearance(&sc.workspace, w[0], w[1]) >= cfg.min_clearance);
            }
            for o in &file.obstacles {
                if let ObstacleSpec::Polygon { vertices, .. } = o {
                    assert!((3..=8).contains(&vertices.len()));
                }
            }
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let cfg = GeneratorConfig::default();
        let a = generate_scenario(&mut scenario_rng(3, 5), &cfg, &EstimatorSpec::default()).unwrap();
        let b = generate_scenario(&mut scenario_rng(3, 5), &cfg, &EstimatorSpec::default()).unwrap();
        let c = generate_scenario(&mut scenario_rng(3, 6), &cfg, &EstimatorSpec::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn impossible_layouts_fail_loudly() {
        let cfg = GeneratorConfig {
            min_clearance: 2.0,
            layout_attempts: 2,
            chain_attempts: 2,
            waypoint_attempts: 2,
            ..GeneratorConfig::default()
        };
        let err = generate_scenario(&mut scenario_rng(1, 0), &cfg, &EstimatorSpec::default()).unwrap_err();
        assert!(matches!(err, CliError::Generator(_)));
    }
}
