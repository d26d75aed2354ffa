use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use brisk_cli::bench::{run_bench, BenchConfig, GeneratorConfig};
use brisk_cli::commands::{compare, estimate, simulate, Overrides, COMPARE_RATES};
use brisk_cli::output::{csv_table, envelope_json, num, text_table};
use brisk_cli::render::render_svg;
use brisk_cli::scenario::{EstimatorSpec, Scenario, ScenarioFile};
use brisk_cli::{CliError, Format, Output, Status};

/// Collision-risk bounds for waypoint trajectories under Brownian noise.
#[derive(Debug, Parser)]
#[command(name = "brisk", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Monte Carlo seed, or the generator seed for `bench`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Absolute tolerance for the pairwise terms.
    #[arg(long, global = true)]
    mvn_tol: Option<f64>,
    /// Grid refinement per segment for the pairwise terms.
    #[arg(long, global = true)]
    r_seg: Option<usize>,
    /// Substeps per segment; a comma-separated list for `compare` and `bench`.
    #[arg(long, global = true, value_delimiter = ',')]
    rd: Vec<usize>,
    /// Monte Carlo paths.
    #[arg(long, global = true)]
    mc_paths: Option<usize>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Every bound for one scenario.
    Estimate {
        scenario: PathBuf,
        /// Also run Monte Carlo.
        #[arg(long)]
        mc: bool,
    },
    /// All methods side by side, over discrete-time rates and obstacle scales.
    Compare {
        scenario: PathBuf,
        /// Obstacle scale factors about each obstacle's centre.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        scale: Vec<f64>,
    },
    /// Monte Carlo estimate only.
    Simulate {
        scenario: PathBuf,
        /// Emit the sampled states of the first N paths as CSV instead.
        #[arg(long, value_name = "N")]
        trace: Option<u64>,
    },
    /// Every method against Monte Carlo over generated scenarios.
    Bench {
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Also write each generated scenario into this directory.
        #[arg(long)]
        emit_dir: Option<PathBuf>,
        /// Tabulate per-scenario estimates instead of the summary (csv, text).
        #[arg(long)]
        per_scenario: bool,
    },
    /// SVG drawing with confidence ellipses.
    Render {
        scenario: PathBuf,
        /// Confidence levels of the ellipses.
        #[arg(long, value_delimiter = ',', default_value = "0.95")]
        ellipses: Vec<f64>,
        /// Ellipses per segment.
        #[arg(long, default_value_t = 4)]
        per_segment: usize,
    },
}

fn overrides(g: &Global) -> Overrides {
    Overrides {
        seed: g.seed,
        mvn_tol: g.mvn_tol,
        r_seg: g.r_seg,
        rd: g.rd.clone(),
        mc_paths: g.mc_paths,
        threads: g.threads,
    }
}

fn read(path: &Path) -> Result<ScenarioFile, CliError> {
    ScenarioFile::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn bench(g: &Global, count: usize, emit_dir: Option<&PathBuf>, per_scenario: bool) -> Result<Output, CliError> {
    let defaults = EstimatorSpec::default();
    let cfg = BenchConfig {
        count,
        seed: g.seed.unwrap_or(defaults.seed),
        rates: if g.rd.is_empty() { vec![5, 100] } else { g.rd.clone() },
        estimator: EstimatorSpec {
            r_seg: g.r_seg.unwrap_or(defaults.r_seg),
            mvn_tol: g.mvn_tol.unwrap_or(defaults.mvn_tol),
            mc_paths: g.mc_paths.unwrap_or(10_000),
            ..defaults
        },
        generator: GeneratorConfig::default(),
    };
    if cfg.rates.contains(&0) {
        return Err(CliError::Usage("--rd values must be at least 1".into()));
    }
    let result = run_bench(&cfg)?;
    if let Some(dir) = emit_dir {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        for s in &result.scenarios {
            let path = dir.join(format!("scenario_{:03}.json", s.index));
            std::fs::write(&path, s.scenario.emit()).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
    }
    let status = if result.scenarios.iter().all(|s| s.converged) {
        Status::Ok
    } else {
        Status::NotConverged
    };
    let per_rows = || {
        result
            .scenarios
            .iter()
            .flat_map(|s| {
                s.estimates.iter().map(move |e| {
                    vec![
                        s.index.to_string(),
                        e.method.clone(),
                        num(e.value),
                        num(s.monte_carlo.p_hat),
                        num(s.monte_carlo.stderr),
                        format!("{:.3e}", e.time_s),
                    ]
                })
            })
            .collect::<Vec<_>>()
    };
    let per_header = ["scenario", "method", "value", "mc", "mc_stderr", "time_s"];
    let body = match (g.format, per_scenario) {
        (Format::Json, _) => envelope_json("bench", &result),
        (Format::Csv, false) => csv_table(&result.summary),
        (Format::Csv, true) => {
            let mut w = per_header.join(",") + "\n";
            for r in per_rows() {
                w += &(r.join(",") + "\n");
            }
            w
        }
        (Format::Text, false) => {
            let rows: Vec<Vec<String>> = result
                .summary
                .iter()
                .map(|m| {
                    vec![
                        m.method.clone(),
                        format!("{:.4}", m.bias),
                        format!("{:.4}", m.rmse),
                        format!("{:.0}%", m.pct_conservative),
                        format!("{:.3e}", m.avg_time_s),
                    ]
                })
                .collect();
            text_table(&["method", "bias", "rmse", "conservative", "avg_time_s"], &rows)
        }
        (Format::Text, true) => text_table(&per_header, &per_rows()),
    };
    Ok(Output { body, status })
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    let g = &cli.global;
    let ov = overrides(g);
    match &cli.command {
        Command::Estimate { scenario, mc } => estimate(&read(scenario)?, &ov, *mc, g.format),
        Command::Compare { scenario, scale } => {
            let rates = if g.rd.is_empty() {
                COMPARE_RATES.to_vec()
            } else {
                g.rd.clone()
            };
            compare(&read(scenario)?, &ov, &rates, scale, g.format)
        }
        Command::Simulate { scenario, trace } => simulate(&read(scenario)?, &ov, *trace, g.format),
        Command::Bench {
            count,
            emit_dir,
            per_scenario,
        } => bench(g, *count, emit_dir.as_ref(), *per_scenario),
        Command::Render {
            scenario,
            ellipses,
            per_segment,
        } => {
            if ellipses.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
                return Err(CliError::Usage("--ellipses levels must lie in (0, 1)".into()));
            }
            let sc = Scenario::from_file(read(scenario)?)?;
            Ok(Output {
                body: render_svg(&sc, ellipses, *per_segment),
                status: Status::Ok,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.global.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(CliError::Usage(format!("cannot start {n} threads: {e}"))),
        },
        None => run(&cli),
    };
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match &cli.global.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &output.body) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{}", output.body),
    }
    match output.status {
        Status::Saturated => eprintln!("warning: zero clearance, risk saturated"),
        Status::NotConverged => eprintln!("warning: some pairwise terms missed their tolerance"),
        Status::Ok => {}
    }
    ExitCode::from(output.status.exit_code() as u8)
}
