//! Probability that a Gaussian point lies in a convex piece.
//!
//! Planar polygons are handled in whitened coordinates as a signed fan of
//! triangles with a common vertex at the mean; each triangle's mass is a 1-D
//! angular integral. Discs use polar coordinates about the mean, where the
//! radial integral is closed form. Halfspaces are exact in any dimension.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, DVector};

use super::chain::integrate;
use crate::gaussian::std_normal_sf;
use crate::geometry::ConvexShape;

/// Beyond this many deviations a Gaussian tail is below `1e-18`.
const FAR: f64 = 9.0;
/// Whitened triangle heights below this are treated as zero.
const DEGENERATE: f64 = 1e-10;
/// Trapezoid nodes for periodic integrands.
const PERIODIC_NODES: usize = 512;

/// Whether [`point_mass`] evaluates `shape` exactly.
pub(crate) fn supported(shape: &ConvexShape) -> bool {
    match shape {
        ConvexShape::Halfspace(_) => true,
        ConvexShape::Polytope(p) => p.hull().is_some(),
        ConvexShape::Ball(b) => b.center.len() == 2,
    }
}

/// `P(x ∈ shape)` for `x ~ N(mean, cov)`. `None` for pieces this module
/// cannot evaluate exactly (bounded pieces outside the plane).
pub(crate) fn point_mass(shape: &ConvexShape, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Option<f64> {
    if cov.iter().all(|&v| v == 0.0) {
        return Some(if shape.contains(mean) { 1.0 } else { 0.0 });
    }
    match shape {
        ConvexShape::Halfspace(h) => {
            let var = h.normal.dot(&(cov * &h.normal));
            let margin = h.offset - h.normal.dot(mean);
            Some(if var <= 0.0 {
                f64::from(margin <= 0.0)
            } else {
                std_normal_sf(margin / var.sqrt())
            })
        }
        _ if mean.len() != 2 => None,
        ConvexShape::Polytope(p) => {
            let hull = p.hull()?;
            Some(polygon_mass(hull, [mean[0], mean[1]], cov))
        }
        ConvexShape::Ball(b) => Some(disc_mass([b.center[0] - mean[0], b.center[1] - mean[1]], b.radius, cov)),
    }
}

/// Lower Cholesky factor of a 2×2 covariance, `(l11, l21, l22)`.
fn cholesky2(cov: &DMatrix<f64>) -> (f64, f64, f64) {
    let l11 = cov[(0, 0)].sqrt();
    let l21 = cov[(1, 0)] / l11;
    let l22 = (cov[(1, 1)] - l21 * l21).max(0.0).sqrt();
    (l11, l21, l22)
}

fn polygon_mass(hull: &[[f64; 2]], mean: [f64; 2], cov: &DMatrix<f64>) -> f64 {
    let (l11, l21, l22) = cholesky2(cov);
    // z = L⁻¹(x − μ); a positive determinant keeps the hull counter-clockwise.
    let whiten = |p: [f64; 2]| {
        let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
        let z0 = dx / l11;
        [z0, (dy - l21 * z0) / l22]
    };
    let w: Vec<[f64; 2]> = hull.iter().map(|&p| whiten(p)).collect();
    let n = w.len();
    let mut inside = true;
    let mut nearest = f64::INFINITY;
    for k in 0..n {
        let (a, b) = (w[k], w[(k + 1) % n]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let len = e[0].hypot(e[1]);
        // Signed distance of the origin from the edge line, positive inside.
        let s = (a[0] * e[1] - a[1] * e[0]) / len;
        inside &= s >= 0.0;
        // Distance from the origin to the edge itself.
        let t = (-(a[0] * e[0] + a[1] * e[1]) / (len * len)).clamp(0.0, 1.0);
        nearest = nearest.min((a[0] + t * e[0]).hypot(a[1] + t * e[1]));
    }
    if !inside && nearest > FAR {
        return 0.0;
    }
    let total: f64 = (0..n).map(|k| triangle_mass(w[k], w[(k + 1) % n])).sum();
    total.clamp(0.0, 1.0)
}

/// Signed standard-normal mass of the triangle `(0, a, b)`: positive when
/// `a → b` turns counter-clockwise about the origin.
fn triangle_mass(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    let e = [b[0] - a[0], b[1] - a[1]];
    let len2 = e[0] * e[0] + e[1] * e[1];
    if cross == 0.0 || len2 == 0.0 {
        return 0.0;
    }
    let sweep = cross.atan2(dot);
    let h = cross.abs() / len2.sqrt();
    if h < DEGENERATE {
        // The mean sits on the edge line; the mass is O(h) and the foot
        // direction is noise.
        return 0.0;
    }
    if h > FAR + 0.5 {
        // The boundary term is below 1e-19.
        return sweep / TAU;
    }
    // Angles of a and b from the foot of the perpendicular, in (−π/2, π/2).
    let s = -(a[0] * e[0] + a[1] * e[1]) / len2;
    let foot = [a[0] + s * e[0], a[1] + s * e[1]];
    let angle_from_foot = |p: [f64; 2]| (foot[0] * p[1] - foot[1] * p[0]).atan2(foot[0] * p[0] + foot[1] * p[1]);
    let (ua, ub) = (angle_from_foot(a), angle_from_foot(b));
    let (lo, hi) = if ua <= ub { (ua, ub) } else { (ub, ua) };
    let width = (0.5 / h.max(1.0)).min(0.25);
    // The integrand vanishes within about h of ±π/2.
    let mut breaks = vec![0.0];
    let mut e = 0.25 * h;
    while e < 0.5 {
        breaks.extend([FRAC_PI_2 - e, e - FRAC_PI_2]);
        e *= 2.0;
    }
    let boundary = integrate(lo, hi, width, &breaks, |u| {
        let c = u.cos();
        if c <= 0.0 {
            0.0
        } else {
            (-0.5 * h * h / (c * c)).exp()
        }
    });
    (sweep - sweep.signum() * boundary) / TAU
}

/// Mass of the disc of radius `rho` centred at `c` (relative to the mean).
fn disc_mass(c: [f64; 2], rho: f64, cov: &DMatrix<f64>) -> f64 {
    let (s11, s12, s22) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    let det = s11 * s22 - s12 * s12;
    // Precision quadratic form along the unit direction θ.
    let q = |th: f64| {
        let (s, c) = th.sin_cos();
        (s22 * c * c - 2.0 * s12 * c * s + s11 * s * s) / det
    };
    let scale = 1.0 / (TAU * det.sqrt());
    let dist = c[0].hypot(c[1]);
    let toward = c[1].atan2(c[0]);
    if dist > rho && (dist - rho) > FAR * (s11 + s22).sqrt() {
        return 0.0;
    }
    if dist < rho {
        // The mean is inside: every ray leaves the disc exactly once.
        let h = TAU / PERIODIC_NODES as f64;
        let outside: f64 = (0..PERIODIC_NODES)
            .map(|k| {
                let alpha = k as f64 * h;
                let (sa, ca) = alpha.sin_cos();
                let s_out = dist * ca + (rho * rho - dist * dist * sa * sa).sqrt();
                let qq = q(toward + alpha);
                (-0.5 * qq * s_out * s_out).exp() / qq
            })
            .sum::<f64>()
            * h;
        return (1.0 - scale * outside).clamp(0.0, 1.0);
    }
    // Rays within `half` of the centre direction cross the disc; α = half·sin w
    // smooths the square-root behaviour at the tangents.
    let half = (rho / dist).min(1.0).asin();
    let value = integrate(-FRAC_PI_2, FRAC_PI_2, PI / 16.0, &[], |w| {
        let alpha = half * w.sin();
        let (sa, ca) = alpha.sin_cos();
        let root = (rho * rho - dist * dist * sa * sa).max(0.0).sqrt();
        let (s_in, s_out) = (dist * ca - root, dist * ca + root);
        let qq = q(toward + alpha);
        let radial = ((-0.5 * qq * s_in * s_in).exp() - (-0.5 * qq * s_out * s_out).exp()) / qq;
        radial * half * w.cos()
    });
    (scale * value).clamp(0.0, 1.0)
}
