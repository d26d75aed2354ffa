//! `estimate`, `compare` and `simulate`.

use std::time::Instant;

use brisk_core::gaussian::MvnOptions;
use brisk_core::montecarlo::{estimate_risk, simulate_paths, McEstimate, SimulationConfig};
use brisk_core::risk::{discrete_time_bound, total_risk, DiscreteMethod, PairMethod, RiskConfig, RiskReport};
use serde::Serialize;

use crate::output::{csv_table, envelope_json, num, text_table, Format, Output, Status};
use crate::scenario::{ObstacleSpec, Point, Scenario, ScenarioFile};
use crate::CliError;

/// Command-line settings that take precedence over the scenario's
/// estimator block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mvn_tol: Option<f64>,
    pub r_seg: Option<usize>,
    pub rd: Vec<usize>,
    pub mc_paths: Option<usize>,
    pub threads: Option<usize>,
}

impl Overrides {
    /// Applies every override; `--rd` must then name at most one rate.
    pub fn apply(&self, file: &ScenarioFile) -> Result<ScenarioFile, CliError> {
        if self.rd.len() > 1 {
            return Err(CliError::Usage("this command takes a single --rd value".into()));
        }
        let mut file = self.apply_except_rd(file);
        if let Some(&r) = self.rd.first() {
            file.estimator.r_d = r;
        }
        Ok(file)
    }

    pub fn apply_except_rd(&self, file: &ScenarioFile) -> ScenarioFile {
        let mut file = file.clone();
        let est = &mut file.estimator;
        if let Some(v) = self.seed {
            est.seed = v;
        }
        if let Some(v) = self.mvn_tol {
            est.mvn_tol = v;
        }
        if let Some(v) = self.r_seg {
            est.r_seg = v;
        }
        if let Some(v) = self.mc_paths {
            est.mc_paths = v;
        }
        file
    }
}

pub fn risk_config(file: &ScenarioFile) -> RiskConfig {
    RiskConfig {
        r_seg: file.estimator.r_seg,
        r_d: file.estimator.r_d,
        pair_method: PairMethod::Recursion,
        discrete_method: DiscreteMethod::PointMass,
        mvn: MvnOptions::with_tolerance(file.estimator.mvn_tol),
        threads: None,
    }
}

pub fn simulation_config(file: &ScenarioFile) -> SimulationConfig {
    SimulationConfig {
        paths: file.estimator.mc_paths,
        r_d: file.estimator.r_d,
        seed: file.estimator.seed,
        threads: None,
    }
}

fn report_status(report: &RiskReport) -> Status {
    let s = if report.saturated {
        Status::Saturated
    } else {
        Status::Ok
    };
    s.worst(if report.converged {
        Status::Ok
    } else {
        Status::NotConverged
    })
}

#[derive(Debug, Clone, Serialize)]
struct EstimateBody<'a> {
    scenario: &'a ScenarioFile,
    pair_method: PairMethod,
    threads: Option<usize>,
    report: &'a RiskReport,
}

#[derive(Debug, Clone, Serialize)]
struct MethodRow {
    method: &'static str,
    r_d: Option<usize>,
    raw: f64,
    clamped: f64,
    stderr: Option<f64>,
    time_s: f64,
}

fn method_rows(report: &RiskReport) -> Vec<MethodRow> {
    let t = &report.timings;
    let row = |method, raw: f64, clamped, time_s| MethodRow {
        method,
        r_d: None,
        raw,
        clamped,
        stderr: None,
        time_s,
    };
    let mut rows = vec![
        row(
            "first_order",
            report.raw.first_order,
            report.clamped.first_order,
            t.hyperplanes + t.first_order,
        ),
        row(
            "second_order",
            report.raw.second_order,
            report.clamped.second_order,
            t.hyperplanes + t.first_order + t.second_order,
        ),
        row("ariu", report.raw.ariu, report.clamped.ariu, t.hyperplanes + t.ariu),
        MethodRow {
            r_d: Some(report.r_d),
            ..row(
                "discrete_time",
                report.raw.discrete_time,
                report.clamped.discrete_time,
                t.hyperplanes + t.discrete_time,
            )
        },
    ];
    if let Some(mc) = &report.monte_carlo {
        rows.push(mc_row(mc));
    }
    rows
}

fn mc_row(mc: &McEstimate) -> MethodRow {
    MethodRow {
        method: "monte_carlo",
        r_d: Some(mc.r_d),
        raw: mc.p_hat,
        clamped: mc.p_hat,
        stderr: Some(mc.stderr),
        time_s: mc.elapsed_secs,
    }
}

fn rows_text(rows: &[MethodRow], scale: Option<&[f64]>) -> Vec<Vec<String>> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let mut cells = Vec::new();
            if let Some(s) = scale {
                cells.push(format!("{}", s[i]));
            }
            cells.extend([
                r.method.to_string(),
                r.r_d.map_or("-".into(), |v| v.to_string()),
                num(r.raw),
                num(r.clamped),
                r.stderr.map_or("-".into(), num),
                format!("{:.3e}", r.time_s),
            ]);
            cells
        })
        .collect()
}

/// Runs every bound, plus Monte Carlo when `with_mc` and `mc_paths > 0`.
pub fn estimate(file: &ScenarioFile, ov: &Overrides, with_mc: bool, format: Format) -> Result<Output, CliError> {
    let file = ov.apply(file)?;
    let sc = Scenario::from_file(file)?;
    let mut report = total_risk(&sc.workspace, &sc.trajectory, &sc.noise, &risk_config(&sc.file))?;
    if with_mc && sc.file.estimator.mc_paths > 0 {
        report.monte_carlo = Some(estimate_risk(
            &sc.trajectory,
            &sc.noise,
            &sc.workspace,
            &simulation_config(&sc.file),
        ));
    }
    let status = report_status(&report);
    let body = match format {
        Format::Json => envelope_json(
            "estimate",
            EstimateBody {
                scenario: &sc.file,
                pair_method: PairMethod::Recursion,
                threads: ov.threads,
                report: &report,
            },
        ),
        Format::Csv => csv_table(&method_rows(&report)),
        Format::Text => estimate_text(&report),
    };
    Ok(Output { body, status })
}

fn estimate_text(report: &RiskReport) -> String {
    let rows = method_rows(report);
    let mut out = text_table(
        &["method", "r_d", "raw", "clamped", "stderr", "time_s"],
        &rows_text(&rows, None),
    );
    out += &format!(
        "pieces {}  r_seg {}  saturated {}  converged {}  pair error {:.1e}\n",
        report.pieces.len(),
        report.r_seg,
        report.saturated,
        report.converged,
        report.mvn_err
    );
    for w in &report.warnings {
        out += &format!("warning: {w}\n");
    }
    out
}

/// Default discrete-time rates for `compare`.
pub const COMPARE_RATES: [usize; 7] = [1, 2, 5, 10, 20, 50, 100];

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub scale: f64,
    pub method: &'static str,
    pub r_d: Option<usize>,
    pub raw: f64,
    pub clamped: f64,
    pub stderr: Option<f64>,
    pub time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
struct CompareBody<'a> {
    scenario: &'a ScenarioFile,
    rates: &'a [usize],
    scales: &'a [f64],
    threads: Option<usize>,
    rows: &'a [CompareRow],
}

/// Every method side by side. The discrete-time bound is evaluated at each
/// of `rates`; Monte Carlo runs at the scenario's `r_d`. Each entry of
/// `scales` repeats the table with every obstacle scaled about its centre,
/// which sweeps the clearance.
pub fn compare(
    file: &ScenarioFile,
    ov: &Overrides,
    rates: &[usize],
    scales: &[f64],
    format: Format,
) -> Result<Output, CliError> {
    if rates.contains(&0) {
        return Err(CliError::Usage("--rd values must be at least 1".into()));
    }
    if scales.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(CliError::Usage("--scale values must be positive".into()));
    }
    let base = ov.apply_except_rd(file);
    Scenario::from_file(base.clone())?;
    let mut rows = Vec::new();
    let mut status = Status::Ok;
    for &scale in scales {
        let sc = Scenario::from_file(scale_obstacles(&base, scale))?;
        let report = total_risk(&sc.workspace, &sc.trajectory, &sc.noise, &risk_config(&sc.file))?;
        status = status.worst(report_status(&report));
        let mut table: Vec<MethodRow> = method_rows(&report)
            .into_iter()
            .filter(|r| r.method != "discrete_time")
            .collect();
        for &r_d in rates {
            let clock = Instant::now();
            let v = discrete_time_bound(&sc.trajectory, &sc.noise, &sc.workspace, r_d, DiscreteMethod::PointMass)?;
            table.push(MethodRow {
                method: "discrete_time",
                r_d: Some(r_d),
                raw: v,
                clamped: v.clamp(0.0, 1.0),
                stderr: None,
                time_s: clock.elapsed().as_secs_f64(),
            });
        }
        if sc.file.estimator.mc_paths > 0 {
            table.push(mc_row(&estimate_risk(
                &sc.trajectory,
                &sc.noise,
                &sc.workspace,
                &simulation_config(&sc.file),
            )));
        }
        rows.extend(table.into_iter().map(|r| CompareRow {
            scale,
            method: r.method,
            r_d: r.r_d,
            raw: r.raw,
            clamped: r.clamped,
            stderr: r.stderr,
            time_s: r.time_s,
        }));
    }
    let body = match format {
        Format::Json => envelope_json(
            "compare",
            CompareBody {
                scenario: &base,
                rates,
                scales,
                threads: ov.threads,
                rows: &rows,
            },
        ),
        Format::Csv => csv_table(&rows),
        Format::Text => {
            let as_method: Vec<MethodRow> = rows
                .iter()
                .map(|r| MethodRow {
                    method: r.method,
                    r_d: r.r_d,
                    raw: r.raw,
                    clamped: r.clamped,
                    stderr: r.stderr,
                    time_s: r.time_s,
                })
                .collect();
            let scale_col: Vec<f64> = rows.iter().map(|r| r.scale).collect();
            text_table(
                &["scale", "method", "r_d", "raw", "clamped", "stderr", "time_s"],
                &rows_text(&as_method, Some(&scale_col)),
            )
        }
    };
    Ok(Output { body, status })
}

/// Every obstacle scaled by `s` about the mean of its vertices, or about its
/// centre for boxes and circles.
pub fn scale_obstacles(file: &ScenarioFile, s: f64) -> ScenarioFile {
    let mut out = file.clone();
    let about = |p: Point, c: Point| [c[0] + s * (p[0] - c[0]), c[1] + s * (p[1] - c[1])];
    for o in &mut out.obstacles {
        match o {
            ObstacleSpec::Polygon {
                vertices,
                convex_pieces,
            } => {
                let n = vertices.len() as f64;
                let c = [
                    vertices.iter().map(|p| p[0]).sum::<f64>() / n,
                    vertices.iter().map(|p| p[1]).sum::<f64>() / n,
                ];
                for v in vertices.iter_mut() {
                    *v = about(*v, c);
                }
                for piece in convex_pieces.iter_mut().flatten() {
                    for v in piece.iter_mut() {
                        *v = about(*v, c);
                    }
                }
            }
            ObstacleSpec::Box { min, max } => {
                let c = [(min[0] + max[0]) / 2.0, (min[1] + max[1]) / 2.0];
                *min = about(*min, c);
                *max = about(*max, c);
            }
            ObstacleSpec::Circle { radius, .. } => *radius *= s,
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct SimulateBody<'a> {
    scenario: &'a ScenarioFile,
    threads: Option<usize>,
    monte_carlo: &'a McEstimate,
}

#[derive(Debug, Clone, Serialize)]
struct TraceRow {
    path: u64,
    t: f64,
    x: f64,
    y: f64,
    in_obstacle: bool,
}

/// Monte Carlo estimate alone, or with `trace = Some(n)` the sampled states
/// of the first `n` paths as CSV.
pub fn simulate(file: &ScenarioFile, ov: &Overrides, trace: Option<u64>, format: Format) -> Result<Output, CliError> {
    let file = ov.apply(file)?;
    if file.estimator.mc_paths == 0 {
        return Err(CliError::Usage("simulate needs at least one path".into()));
    }
    let sc = Scenario::from_file(file)?;
    let cfg = simulation_config(&sc.file);
    if let Some(n) = trace {
        let sampler = simulate_paths(&sc.trajectory, &sc.noise, &cfg);
        let mut rows = Vec::new();
        for k in 0..n {
            let mut path = sampler.path(k);
            while let Some((t, x)) = path.advance() {
                let p = nalgebra::DVector::from_column_slice(x);
                rows.push(TraceRow {
                    path: k,
                    t,
                    x: x[0],
                    y: x[1],
                    in_obstacle: sc.workspace.contains(&p),
                });
            }
        }
        return Ok(Output {
            body: csv_table(&rows),
            status: Status::Ok,
        });
    }
    let mc = estimate_risk(&sc.trajectory, &sc.noise, &sc.workspace, &cfg);
    let body = match format {
        Format::Json => envelope_json(
            "simulate",
            SimulateBody {
                scenario: &sc.file,
                threads: ov.threads,
                monte_carlo: &mc,
            },
        ),
        Format::Csv => csv_table(&[mc_row(&mc)]),
        Format::Text => format!(
            "p_hat {}  stderr {}  hits {}/{}  r_d {}  seed {}  {:.3} s\n",
            num(mc.p_hat),
            num(mc.stderr),
            mc.hits,
            mc.paths,
            mc.r_d,
            mc.seed,
            mc.elapsed_secs
        ),
    };
    Ok(Output {
        body,
        status: Status::Ok,
    })
}
