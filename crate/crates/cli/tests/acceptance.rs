//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Criteria 2 to 4 share one benchmark run.

use std::f64::consts::SQRT_2;
use std::process::ExitCode;
use std::time::Instant;

use brisk_cli::bench::{generate_scenario, run_bench, scenario_rng, BenchConfig, BenchResult, GeneratorConfig};
use brisk_cli::commands::risk_config;
use brisk_cli::scenario::{EstimatorSpec, Scenario};
use brisk_core::gaussian::{bivariate_normal_cdf, mvn_cdf, GaussianError, GaussianVector, MvnOptions};
use brisk_core::geometry::{ConvexShape, Obstacle, Workspace};
use brisk_core::montecarlo::{brownian_sup_check, estimate_risk, SimulationConfig};
use brisk_core::process::{
    cross_covariance, propagate_covariance, segment_covariance, stacked_covariance, NoiseModel, PlannedTrajectory,
    SegmentGrid, Timing,
};
use brisk_core::risk::{total_risk, RiskConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Expected overshoot of a Gaussian random walk over a level, in step
/// deviations: `−ζ(1/2)/√(2π)`.
const OVERSHOOT: f64 = 0.5825971579390106;

fn q(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn v2(x: f64, y: f64) -> DVector<f64> {
    DVector::from_vec(vec![x, y])
}

fn reflection() -> Verdict {
    let (d, rate) = (0.0627, 1e-3);
    let traj = PlannedTrajectory::new(vec![v2(0.0, 0.0), v2(1.0, 0.0)], Timing::Speed(1.0)).unwrap();
    let noise = NoiseModel::isotropic(2, rate).unwrap();
    let ws = Workspace::new(vec![Obstacle::convex(ConvexShape::halfspace(v2(0.0, 1.0), d).unwrap())]);
    let report = total_risk(&ws, &traj, &noise, &RiskConfig::default()).unwrap();
    let p1 = report.pieces[0].segments[0].p;
    let sigma = rate.sqrt();
    let exact = 2.0 * q(d / sigma);
    let closed_ok = (p1 - exact).abs() <= 1e-10;

    let cfg = SimulationConfig {
        paths: 100_000,
        r_d: 200,
        seed: 11,
        threads: None,
    };
    let mc = estimate_risk(&traj, &noise, &ws, &cfg);
    // Substep monitoring sees the barrier shifted up by the mean overshoot.
    let step_sd = (rate / cfg.r_d as f64).sqrt();
    let monitored = 2.0 * q((d + OVERSHOOT * step_sd) / sigma);
    let coarse_ok = (mc.p_hat - monitored).abs() <= 3.0 * mc.stderr;

    let fine_cfg = SimulationConfig { r_d: 4000, ..cfg };
    let fine = brownian_sup_check(d, 1.0, rate, &fine_cfg);
    let fine_ok = (fine.p_hat - exact).abs() <= 3.0 * fine.stderr;
    verdict(
        closed_ok && coarse_ok && fine_ok,
        format!(
            "p1 {p1:.12} vs 2Q {exact:.12}; mc(r_d=200) {:.5}±{:.5} vs grid-shifted {monitored:.5}; mc(r_d=4000) {:.5}±{:.5} vs {exact:.5}",
            mc.p_hat, mc.stderr, fine.p_hat, fine.stderr
        ),
    )
}

fn bench() -> BenchResult {
    run_bench(&BenchConfig {
        count: 100,
        seed: 2024,
        rates: vec![5, 100],
        estimator: EstimatorSpec {
            mc_paths: 10_000,
            ..EstimatorSpec::default()
        },
        generator: GeneratorConfig::default(),
    })
    .expect("benchmark runs")
}

fn ordering(b: &BenchResult) -> Verdict {
    let tol = 1e-5;
    let ok = b
        .scenarios
        .iter()
        .filter(|s| {
            let r = &s.report.raw;
            r.second_order <= r.first_order + tol && r.first_order <= r.ariu + tol
        })
        .count();
    verdict(
        ok == b.scenarios.len(),
        format!("{ok}/{} scenarios ordered", b.scenarios.len()),
    )
}

fn stat<'a>(b: &'a BenchResult, method: &str) -> &'a brisk_cli::bench::MethodStats {
    b.summary
        .iter()
        .find(|m| m.method == method)
        .expect("method in summary")
}

fn conservatism(b: &BenchResult) -> Verdict {
    let (first, second, ariu) = (stat(b, "first_order"), stat(b, "second_order"), stat(b, "ariu"));
    let all = first.pct_conservative == 100.0 && second.pct_conservative == 100.0;
    let ordered = second.rmse < first.rmse && first.rmse < ariu.rmse;
    verdict(
        all && ordered,
        format!(
            "conservative first {:.0}% second {:.0}%; rmse second {:.4} < first {:.4} < ariu {:.4}",
            first.pct_conservative, second.pct_conservative, second.rmse, first.rmse, ariu.rmse
        ),
    )
}

fn discrete_pathology(b: &BenchResult) -> Verdict {
    let n = b.scenarios.len() as f64;
    let under = b
        .scenarios
        .iter()
        .filter(|s| s.value("discrete_time_rd5").unwrap() < s.monte_carlo.p_hat)
        .count();
    let mean = |m: &str| b.scenarios.iter().map(|s| s.value(m).unwrap()).sum::<f64>() / n;
    let (rd100, second) = (mean("discrete_time_rd100"), mean("second_order"));
    let pct = 100.0 * under as f64 / n;
    verdict(
        pct >= 20.0 && rd100 >= 2.0 * second,
        format!(
            "r_d=5 below mc in {pct:.0}%; mean r_d=100 {rd100:.4} vs second-order {second:.4} ({:.1}x)",
            rd100 / second
        ),
    )
}

fn speedup() -> Verdict {
    let cfg = GeneratorConfig {
        waypoints: (21, 21),
        step: (0.1, 0.3),
        ..GeneratorConfig::default()
    };
    let file = generate_scenario(&mut scenario_rng(5, 0), &cfg, &EstimatorSpec::default()).unwrap();
    let sc = Scenario::from_file(file).unwrap();
    let report = total_risk(&sc.workspace, &sc.trajectory, &sc.noise, &risk_config(&sc.file)).unwrap();
    let t = report.timings;
    let first = t.hyperplanes + t.first_order;
    let second = first + t.second_order;
    let mc = estimate_risk(
        &sc.trajectory,
        &sc.noise,
        &sc.workspace,
        &SimulationConfig {
            paths: 100_000,
            r_d: 100,
            ..SimulationConfig::default()
        },
    );
    let ratio = mc.elapsed_secs / second;
    verdict(
        sc.trajectory.num_segments() == 20 && ratio >= 10.0,
        format!(
            "{} segments: first {first:.3}s, second {second:.3}s, mc {:.3}s ({ratio:.0}x)",
            sc.trajectory.num_segments(),
            mc.elapsed_secs
        ),
    )
}

fn random_cov(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let scales = DVector::from_fn(k, |_, _| rng.random_range(0.5..2.0));
    let c = &a * a.transpose() / k as f64 + DMatrix::identity(k, k) * 0.05;
    DMatrix::from_fn(k, k, |i, j| c[(i, j)] * scales[i] * scales[j])
}

fn random_box(rng: &mut ChaCha8Rng, cov: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    (0..cov.nrows())
        .map(|i| {
            let s = cov[(i, i)].sqrt();
            let lo = if rng.random_bool(0.2) {
                f64::NEG_INFINITY
            } else {
                s * rng.random_range(-2.5..0.5)
            };
            let hi = if rng.random_bool(0.2) {
                f64::INFINITY
            } else if lo.is_finite() {
                lo + s * rng.random_range(0.3..3.0)
            } else {
                s * rng.random_range(-1.0..2.0)
            };
            (lo, hi)
        })
        .unzip()
}

/// Fraction of `n` samples of `N(0, cov)` inside the box.
fn box_mc(cov: &DMatrix<f64>, lo: &[f64], hi: &[f64], n: usize, seed: u64) -> f64 {
    let l = cov.clone().cholesky().expect("positive definite").l();
    let k = cov.nrows();
    const CHUNK: usize = 1 << 16;
    let hits: usize = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut z = vec![0.0; k];
            let mut count = 0;
            for _ in c * CHUNK..((c + 1) * CHUNK).min(n) {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                let inside = (0..k).all(|i| {
                    let x: f64 = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
                    x >= lo[i] && x <= hi[i]
                });
                count += usize::from(inside);
            }
            count
        })
        .sum();
    hits as f64 / n as f64
}

fn mvn_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let opts = MvnOptions {
        target_abs_err: 1e-4,
        max_points: 1_000_000,
        shifts: 8,
    };
    let n = 10_000_000;
    let (mut ok, mut worst) = (0, 0.0f64);
    for case in 0..50 {
        let k = 2 + case % 5;
        let cov = random_cov(&mut rng, k);
        let (lo, hi) = random_box(&mut rng, &cov);
        let est = match mvn_cdf(&GaussianVector::new(cov.clone()).unwrap(), &lo, &hi, &opts) {
            Ok(e) => e,
            Err(GaussianError::NotConverged { estimate }) => estimate,
            Err(e) => panic!("{e}"),
        };
        let p = box_mc(&cov, &lo, &hi, n, 1000 + case as u64);
        let stderr = (p * (1.0 - p) / n as f64).sqrt();
        let allowed = (3.0 * stderr).max(est.err);
        worst = worst.max((est.prob - p).abs() / allowed);
        ok += usize::from((est.prob - p).abs() <= allowed);
    }

    let mut bvn_gap = 0.0f64;
    for _ in 0..200 {
        let cov = random_cov(&mut rng, 2);
        let (lo, hi) = random_box(&mut rng, &cov);
        let est = mvn_cdf(
            &GaussianVector::new(cov.clone()).unwrap(),
            &lo,
            &hi,
            &MvnOptions::default(),
        )
        .unwrap();
        let (s1, s2) = (cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt());
        let rho = cov[(0, 1)] / (s1 * s2);
        let f = |a: f64, b: f64| bivariate_normal_cdf(a / s1, b / s2, rho);
        let rect = f(hi[0], hi[1]) - f(lo[0], hi[1]) - f(hi[0], lo[1]) + f(lo[0], lo[1]);
        bvn_gap = bvn_gap.max((est.prob - rect).abs());
    }
    verdict(
        ok == 50 && bvn_gap <= 1e-6,
        format!("{ok}/50 within max(3 se, err), worst ratio {worst:.2}; k=2 vs bivariate max gap {bvn_gap:.1e}"),
    )
}

fn refinement() -> Verdict {
    let rates = [1, 2, 4, 8];
    let tol = MvnOptions::default().target_abs_err;
    let (mut pair_viol, mut bound_viol, mut pairs) = (0, 0, 0);
    for i in 0..20 {
        let file = generate_scenario(
            &mut scenario_rng(77, i),
            &GeneratorConfig::default(),
            &EstimatorSpec::default(),
        )
        .unwrap();
        let sc = Scenario::from_file(file).unwrap();
        let reports: Vec<_> = rates
            .iter()
            .map(|&r| {
                let cfg = RiskConfig {
                    r_seg: r,
                    r_d: 1,
                    ..RiskConfig::default()
                };
                total_risk(&sc.workspace, &sc.trajectory, &sc.noise, &cfg).unwrap()
            })
            .collect();
        for w in reports.windows(2) {
            let n_pairs: usize = w[0].pieces.iter().map(|p| p.pairs.len()).sum();
            for (pa, pb) in w[0].pieces.iter().zip(&w[1].pieces) {
                for (a, b) in pa.pairs.iter().zip(&pb.pairs) {
                    pairs += 1;
                    if b.p_lb < a.p_lb - 2.0 * (a.mvn_err.max(tol) + b.mvn_err.max(tol)) {
                        pair_viol += 1;
                    }
                }
            }
            if w[1].raw.second_order > w[0].raw.second_order + 4.0 * tol * n_pairs as f64 {
                bound_viol += 1;
            }
        }
    }
    verdict(
        pair_viol == 0 && bound_viol == 0,
        format!("{pair_viol} pair decreases over {pairs} refinements; {bound_viol} second-order increases"),
    )
}

fn min_rule() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let (mut worst, mut psd_ok) = (0.0f64, 0);
    for _ in 0..100 {
        let dim = rng.random_range(2..=3);
        let n_wp = rng.random_range(3..=6);
        let wps: Vec<DVector<f64>> = (0..n_wp)
            .map(|_| DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let durations = (1..n_wp).map(|_| rng.random_range(0.2..2.0)).collect();
        let traj = PlannedTrajectory::new(wps, Timing::Durations(durations)).unwrap();
        let noise = NoiseModel::new(random_cov(&mut rng, dim) * 1e-2).unwrap();
        let sched = propagate_covariance(&traj, &noise);
        let unit = |rng: &mut ChaCha8Rng| {
            let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            v.normalize()
        };
        let (a, b) = (unit(&mut rng), unit(&mut rng));
        let j = rng.random_range(0..traj.num_segments() - 1);
        let grid = |rng: &mut ChaCha8Rng, s: usize| {
            let (t0, t1) = (traj.times()[s], traj.times()[s + 1]);
            let mut inner: Vec<f64> = (0..rng.random_range(0..6)).map(|_| rng.random_range(t0..t1)).collect();
            inner.sort_by(f64::total_cmp);
            inner.dedup();
            let times = std::iter::once(t0).chain(inner).chain(std::iter::once(t1)).collect();
            SegmentGrid::custom(&traj, s, times).unwrap()
        };
        let (g, h) = (grid(&mut rng, j), grid(&mut rng, j + 1));
        // Deviation starts at zero, so Cov(uᵀx(s), wᵀx(t)) = min(s, t)·uᵀRw.
        let oracle = |u: &DVector<f64>, w: &DVector<f64>, ts: &[f64], tt: &[f64]| {
            let c = u.dot(&(noise.matrix() * w));
            DMatrix::from_fn(ts.len(), tt.len(), |p, q| ts[p].min(tt[q]) * c)
        };
        let gap = |m: &DMatrix<f64>, o: &DMatrix<f64>| (m - o).abs().max();
        worst = worst
            .max(gap(
                &segment_covariance(&a, &g, &sched, &noise),
                &oracle(&a, &a, g.times(), g.times()),
            ))
            .max(gap(
                &segment_covariance(&b, &h, &sched, &noise),
                &oracle(&b, &b, h.times(), h.times()),
            ))
            .max(gap(
                &cross_covariance(&a, &b, &g, &h, &sched, &noise).unwrap(),
                &oracle(&a, &b, g.times(), h.times()),
            ));
        let stacked = stacked_covariance(&a, &b, &g, &h, &sched, &noise).unwrap();
        let min_eig = stacked.clone().symmetric_eigenvalues().min();
        psd_ok += usize::from(min_eig >= -1e-9 * stacked.trace());
    }
    verdict(
        worst <= 1e-12 && psd_ok == 100,
        format!("max entry gap {worst:.1e}; {psd_ok}/100 stacked covariances PSD"),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, run: &dyn Fn() -> Verdict| {
        let clock = Instant::now();
        let v = run();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n} {status} {name} ({:.1}s): {}",
            clock.elapsed().as_secs_f64(),
            v.detail
        );
        failed += usize::from(!v.pass);
    };
    report(1, "reflection closed form", &reflection);
    let clock = Instant::now();
    let b = bench();
    println!(
        "benchmark of 100 scenarios shared by criteria 2-4 ({:.1}s)",
        clock.elapsed().as_secs_f64()
    );
    report(2, "bound ordering", &|| ordering(&b));
    report(3, "conservatism", &|| conservatism(&b));
    report(4, "discrete-time pathology", &|| discrete_pathology(&b));
    report(5, "speedup over monte carlo", &speedup);
    report(6, "mvn cdf correctness", &mvn_correctness);
    report(7, "refinement monotonicity", &refinement);
    report(8, "min-rule covariance", &min_rule);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
