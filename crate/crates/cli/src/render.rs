//! SVG drawing of a scenario with confidence ellipses of the tracking error.

use std::fmt::Write as _;

use brisk_core::process::propagate_covariance;
use nalgebra::Matrix2;

use crate::scenario::{ObstacleSpec, Point, Scenario};

/// Drawing width in pixels; the height follows the workspace aspect ratio.
const WIDTH: f64 = 600.0;

/// Level set `xᵀΣ⁻¹x = q` of a 2-D Gaussian, `q` the chi-square(2)
/// quantile of the confidence level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: Point,
    /// Semi-axes, major first.
    pub radii: [f64; 2],
    /// Angle of the major axis from the x-axis, in degrees.
    pub angle_deg: f64,
}

/// `−2·ln(1 − level)`.
pub fn chi2_2_quantile(level: f64) -> f64 {
    assert!(level > 0.0 && level < 1.0, "confidence level must lie in (0, 1)");
    -2.0 * (-level).ln_1p()
}

pub fn confidence_ellipse(center: Point, cov: &Matrix2<f64>, level: f64) -> Ellipse {
    let q = chi2_2_quantile(level);
    let eig = cov.symmetric_eigen();
    let (major, minor) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let axis = eig.eigenvectors.column(major);
    Ellipse {
        center,
        radii: [
            (eig.eigenvalues[major].max(0.0) * q).sqrt(),
            (eig.eigenvalues[minor].max(0.0) * q).sqrt(),
        ],
        angle_deg: axis[1].atan2(axis[0]).to_degrees(),
    }
}

/// Ellipses at every waypoint and at `per_segment − 1` interior times of
/// each segment, for each level.
pub fn ellipses(sc: &Scenario, levels: &[f64], per_segment: usize) -> Vec<(f64, Ellipse)> {
    let traj = &sc.trajectory;
    let sched = propagate_covariance(traj, &sc.noise);
    let mut out = Vec::new();
    let per_segment = per_segment.max(1);
    for j in 0..traj.num_segments() {
        let first = if j == 0 { 0 } else { 1 };
        for i in first..=per_segment {
            let t = traj.times()[j] + traj.durations()[j] * i as f64 / per_segment as f64;
            let cov = sched.on_segment(traj, &sc.noise, j, t);
            let cov = Matrix2::new(cov[(0, 0)], cov[(0, 1)], cov[(1, 0)], cov[(1, 1)]);
            let x = traj.position_on_segment(j, t);
            for &level in levels {
                out.push((level, confidence_ellipse([x[0], x[1]], &cov, level)));
            }
        }
    }
    out
}

fn points_attr(points: &[Point]) -> String {
    points
        .iter()
        .map(|p| format!("{},{}", p[0], p[1]))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Full drawing. World coordinates are kept in the markup with a y-up group
/// transform; strokes do not scale.
pub fn render_svg(sc: &Scenario, levels: &[f64], per_segment: usize) -> String {
    let ws = &sc.file.workspace;
    let (w, h) = (ws.max[0] - ws.min[0], ws.max[1] - ws.min[1]);
    let s = WIDTH / w;
    let height = h * s;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(
        svg,
        r#"<g transform="matrix({s} 0 0 {} {} {})" fill="none" stroke-width="1.5">"#,
        -s,
        -ws.min[0] * s,
        ws.max[1] * s
    );
    let stroke = r#"vector-effect="non-scaling-stroke""#;
    let _ = writeln!(
        svg,
        r##"<rect class="workspace" x="{}" y="{}" width="{w}" height="{h}" stroke="#444" {stroke}/>"##,
        ws.min[0], ws.min[1]
    );
    for o in &sc.file.obstacles {
        match o {
            ObstacleSpec::Polygon { vertices, .. } => {
                let _ = writeln!(
                    svg,
                    r##"<polygon class="obstacle" points="{}" fill="#999" stroke="#333" {stroke}/>"##,
                    points_attr(vertices)
                );
            }
            ObstacleSpec::Box { min, max } => {
                let _ = writeln!(
                    svg,
                    r##"<rect class="obstacle" x="{}" y="{}" width="{}" height="{}" fill="#999" stroke="#333" {stroke}/>"##,
                    min[0],
                    min[1],
                    max[0] - min[0],
                    max[1] - min[1]
                );
            }
            ObstacleSpec::Circle { center, radius } => {
                let _ = writeln!(
                    svg,
                    r##"<circle class="obstacle" cx="{}" cy="{}" r="{radius}" fill="#999" stroke="#333" {stroke}/>"##,
                    center[0], center[1]
                );
            }
        }
    }
    if let Some(goal) = &sc.file.goal {
        let _ = writeln!(
            svg,
            r##"<circle class="goal" cx="{}" cy="{}" r="{}" stroke="#2a2" stroke-dasharray="4 3" {stroke}/>"##,
            goal.center[0], goal.center[1], goal.radius
        );
    }
    for (level, e) in ellipses(sc, levels, per_segment) {
        let _ = writeln!(
            svg,
            r##"<ellipse class="confidence" data-level="{level}" cx="{}" cy="{}" rx="{}" ry="{}" transform="rotate({} {} {})" stroke="#c33" {stroke}/>"##,
            e.center[0], e.center[1], e.radii[0], e.radii[1], e.angle_deg, e.center[0], e.center[1]
        );
    }
    let _ = writeln!(
        svg,
        r##"<polyline class="plan" points="{}" stroke="#15c" {stroke}/>"##,
        points_attr(&sc.file.waypoints)
    );
    let dot = 3.0 / s;
    for p in &sc.file.waypoints {
        let _ = writeln!(
            svg,
            r##"<circle class="waypoint" cx="{}" cy="{}" r="{dot}" fill="#15c"/>"##,
            p[0], p[1]
        );
    }
    svg += "</g>\n</svg>\n";
    svg
}
