//! Joint grid-crossing probability of two consecutive segments by 1-D
//! quadrature recursions.
//!
//! With `Σ_x(t) = t·R`, the projections `A = aᵀx` and `B = bᵀx` are scalar
//! Brownian motions with `B = κA + C`, where `C` is a Brownian motion
//! independent of `A`. Given `A(t_{j+1})`, the value `B(t_{j+1})` is
//! independent of the earlier history of `A`, and `B`'s future increments are
//! independent of the past. Therefore
//!
//! `p_lb = ∫ f̄(u)·Ḡ(u) du`, where
//! - `f̄` is the density of `A(t_{j+1})` on the event that `A` exceeded `d_j`
//!   at some point of segment `j`'s grid (forward recursion);
//! - `Ḡ(u)` is the probability that `B` exceeds `d_{j+1}` at some point of
//!   segment `j+1`'s grid given `A(t_{j+1}) = u` (backward recursion).
//!
//! Both recursions only need the region within a few step deviations below the
//! barrier; every mass above it is closed form. Integrals use composite
//! 8-point Gauss–Legendre panels no wider than one step deviation, and
//! kernels are truncated at `REACH` deviations.

use crate::gaussian::{bivariate_normal_upper, std_normal_cdf, std_normal_pdf, std_normal_sf};

const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
/// Domains extend this many deviations below a barrier.
const REACH: f64 = 10.0;
const MAX_PANELS: f64 = 4000.0;

/// Projected Brownian motions on the grids of segments `j` and `j + 1`.
#[derive(Debug, Clone)]
pub(crate) struct PairChain<'a> {
    /// `aᵀRa`, `bᵀRb`, `aᵀRb`.
    pub rate_a: f64,
    pub rate_b: f64,
    pub rate_ab: f64,
    /// Absolute grid times; `times_b[0] == times_a[last]`.
    pub times_a: &'a [f64],
    pub times_b: &'a [f64],
    pub d_a: f64,
    pub d_b: f64,
}

fn normal_pdf(x: f64, sd: f64) -> f64 {
    std_normal_pdf(x / sd) / sd
}

/// Gauss–Legendre nodes (ascending) and weights on the given panel edges.
fn quadrature(edges: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(8 * edges.len());
    let mut w = Vec::with_capacity(8 * edges.len());
    for e in edges.windows(2) {
        let (mid, half) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
        if half <= 0.0 {
            continue;
        }
        for k in (0..4).rev() {
            x.push(mid - half * GL_NODES[k]);
            w.push(half * GL_WEIGHTS[k]);
        }
        for k in 0..4 {
            x.push(mid + half * GL_NODES[k]);
            w.push(half * GL_WEIGHTS[k]);
        }
    }
    (x, w)
}

/// Indices of sorted `nodes` within `radius` of `x`.
fn band(nodes: &[f64], x: f64, radius: f64) -> std::ops::Range<usize> {
    nodes.partition_point(|&y| y < x - radius)..nodes.partition_point(|&y| y <= x + radius)
}

/// Uniform panels of width at most `width` covering `[lo, hi]`.
fn uniform_edges(lo: f64, hi: f64, width: f64) -> Vec<f64> {
    let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
    (0..=panels)
        .map(|i| {
            if i == panels {
                hi
            } else {
                lo + (hi - lo) * i as f64 / panels as f64
            }
        })
        .collect()
}

/// `∫_{y>d} φ_σ(x − y)·φ_{√v}(y) dy`: mass above the barrier at the previous
/// grid point carried to `x`.
fn carried_from_above(x: f64, v: f64, sigma: f64, d: f64) -> f64 {
    if v <= 0.0 {
        // Deterministic start at 0, below the barrier.
        return 0.0;
    }
    let s2 = sigma * sigma;
    let total = v + s2;
    let m = x * v / total;
    let tau = (v * s2 / total).sqrt();
    normal_pdf(x, total.sqrt()) * std_normal_sf((d - m) / tau)
}

/// Composite Gauss–Legendre integral of `f` over `[lo, hi]` with panels of
/// at most `width`, plus any interior `breaks`.
pub(super) fn integrate(lo: f64, hi: f64, width: f64, breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let width = width.max((hi - lo) / MAX_PANELS);
    let mut edges = uniform_edges(lo, hi, width);
    edges.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let (x, w) = quadrature(&edges);
    x.iter().zip(&w).map(|(&x, &w)| w * f(x)).sum()
}

/// Quadrature mesh below a barrier with values of a recursion on it.
struct Mesh {
    x: Vec<f64>,
    w: Vec<f64>,
    f: Vec<f64>,
}

impl Mesh {
    fn below(barrier: f64, depth: f64, width: f64) -> Self {
        let (x, w) = quadrature(&uniform_edges(barrier - depth, barrier, width));
        let f = vec![0.0; x.len()];
        Self { x, w, f }
    }

    /// `∫ φ_σ(y − x)·f(y) dy` over the mesh.
    fn smooth(&self, x: f64, sigma: f64) -> f64 {
        let mut acc = 0.0;
        for i in band(&self.x, x, REACH * sigma) {
            acc += self.w[i] * normal_pdf(self.x[i] - x, sigma) * self.f[i];
        }
        acc
    }
}

impl PairChain<'_> {
    /// `p_lb` at quadrature resolution `res` (panels per step deviation).
    pub(crate) fn joint_crossing(&self, res: f64) -> f64 {
        let ta = self.times_a;
        let tb = self.times_b;
        let (r, s) = (ta.len() - 1, tb.len() - 1);
        let t_shared = ta[r];

        // Forward: f̄_p below d_a for p = 0..r-1; f̄_0 = 0.
        let step_a: Vec<f64> = ta.windows(2).map(|w| (self.rate_a * (w[1] - w[0])).sqrt()).collect();
        let min_a = step_a.iter().copied().fold(f64::INFINITY, f64::min);
        let span_a = (self.rate_a * (t_shared - ta[0])).sqrt();
        let mut fa = Mesh::below(self.d_a, REACH * span_a, min_a / res);
        for p in 0..r - 1 {
            let (v, sigma) = (self.rate_a * ta[p], step_a[p]);
            let next: Vec<f64> =
                fa.x.iter()
                    .map(|&x| carried_from_above(x, v, sigma, self.d_a) + fa.smooth(x, sigma))
                    .collect();
            fa.f = next;
        }
        let (v_last, sigma_last) = (self.rate_a * ta[r - 1], step_a[r - 1]);
        let fbar_r = |u: f64| carried_from_above(u, v_last, sigma_last, self.d_a) + fa.smooth(u, sigma_last);

        // Backward: h̄_q below d_b for q = s-1 down to 1; h̄_s = 0 there.
        let step_b: Vec<f64> = tb.windows(2).map(|w| (self.rate_b * (w[1] - w[0])).sqrt()).collect();
        let min_b = step_b.iter().copied().fold(f64::INFINITY, f64::min);
        let span_b = (self.rate_b * (tb[s] - tb[0])).sqrt();
        let mut hb = Mesh::below(self.d_b, REACH * span_b, min_b / res);
        for q in (1..s).rev() {
            let sigma = step_b[q];
            let next: Vec<f64> =
                hb.x.iter()
                    .map(|&v| std_normal_sf((self.d_b - v) / sigma) + hb.smooth(v, sigma))
                    .collect();
            hb.f = next;
        }

        // Coupling at the shared waypoint: B = κ·u + N(0, sd_c²) given A = u.
        let kappa = self.rate_ab / self.rate_a;
        let cond_var = ((self.rate_b - self.rate_ab * kappa) * t_shared).max(0.0);
        let sd_c = if cond_var <= 1e-24 * self.rate_b * t_shared {
            0.0
        } else {
            cond_var.sqrt()
        };
        let sigma1 = step_b[0];
        let sw = (sd_c * sd_c + sigma1 * sigma1).sqrt();
        let g_bar = |u: f64| self.crossing_after(kappa * u, sd_c, sigma1, &hb);

        let sd_r = (self.rate_a * t_shared).sqrt();
        let a_lo = self.d_a - REACH * span_a;
        // Total A-mass above d_a over an interval, closed form.
        let upper_mass = |lo: f64, hi: f64| {
            let lo = lo.max(self.d_a);
            if hi <= lo {
                0.0
            } else {
                std_normal_sf(lo / sd_r) - std_normal_sf(hi / sd_r)
            }
        };

        if kappa.abs() * (span_a + sd_r) < 1e-12 * (sw + span_b) {
            // B at the shared waypoint does not depend on A.
            let below = integrate(a_lo, self.d_a, min_a / res, &[], fbar_r);
            return g_bar(0.0) * (below + upper_mass(self.d_a, f64::INFINITY));
        }

        // Ḡ is 0 or 1 outside this μ-window, and jumps near μ = d_b when
        // sd_c is small.
        let mu_lo = self.d_b - REACH * (span_b + sw);
        let mu_hi = self.d_b + REACH * sd_c;
        let (u_lo, u_hi) = if kappa > 0.0 {
            (mu_lo / kappa, mu_hi / kappa)
        } else {
            (mu_hi / kappa, mu_lo / kappa)
        };
        let center = self.d_b / kappa;
        let mut breaks = vec![center, self.d_a];
        let u_scale = sw / kappa.abs() / res;
        let mut h = sd_c / kappa.abs() / 4.0;
        while h > 0.0 && h < u_scale {
            breaks.push(center - h);
            breaks.push(center + h);
            h *= 2.0;
        }
        let density = |u: f64| if u <= self.d_a { fbar_r(u) } else { normal_pdf(u, sd_r) };

        // Inside the window.
        let in_lo = u_lo.max(a_lo);
        let in_hi = u_hi.min(self.d_a.max(0.0) + REACH * sd_r);
        let width = u_scale.min(min_a / res).min(sd_r / res);
        let mut total = integrate(in_lo, in_hi, width, &breaks, |u| {
            let f = density(u);
            if f == 0.0 {
                0.0
            } else {
                f * g_bar(u)
            }
        });
        // Where Ḡ = 1.
        let (one_lo, one_hi) = if kappa > 0.0 {
            (u_hi, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, u_lo)
        };
        total += integrate(one_lo.max(a_lo), one_hi.min(self.d_a), min_a / res, &[], fbar_r);
        total += upper_mass(one_lo, one_hi);
        total
    }

    /// Probability that `B` exceeds `d_b` somewhere on segment `j + 1`'s
    /// grid, given `B(t_{j+1}) ~ N(mu, sd_c²)`.
    fn crossing_after(&self, mu: f64, sd_c: f64, sigma1: f64, hb: &Mesh) -> f64 {
        let d = self.d_b;
        if sd_c == 0.0 {
            if mu > d {
                return 1.0;
            }
            return std_normal_sf((d - mu) / sigma1) + hb.smooth(mu, sigma1);
        }
        let sw2 = sd_c * sd_c + sigma1 * sigma1;
        let sw = sw2.sqrt();
        let above_now = std_normal_sf((d - mu) / sd_c);
        let above_next =
            std_normal_sf((d - mu) / sw) - bivariate_normal_upper((d - mu) / sd_c, (d - mu) / sw, sd_c / sw);
        let tau = sd_c * sigma1 / sw;
        let mut later = 0.0;
        for i in band(&hb.x, mu, REACH * sw) {
            if hb.f[i] != 0.0 {
                let y = hb.x[i];
                let m = (mu * sigma1 * sigma1 + y * sd_c * sd_c) / sw2;
                later += hb.w[i] * hb.f[i] * normal_pdf(y - mu, sw) * std_normal_cdf((d - m) / tau);
            }
        }
        above_now + above_next.max(0.0) + later
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_integrates_gaussians() {
        let (x, w) = quadrature(&uniform_edges(-12.0, 12.0, 1.0));
        let total: f64 = x.iter().zip(&w).map(|(&x, &w)| w * normal_pdf(x, 1.0)).sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn carried_mass_integrates_to_tail() {
        // ∫ over all x of the carried density is P(Y > d).
        let (x, w) = quadrature(&uniform_edges(-20.0, 20.0, 0.25));
        let total: f64 = x
            .iter()
            .zip(&w)
            .map(|(&x, &w)| w * carried_from_above(x, 2.0, 0.7, 0.5))
            .sum();
        assert!((total - std_normal_sf(0.5 / 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn parallel_single_steps_match_closed_form() {
        // r = s = 1, identical normals, first segment: p_lb = P(W1 > d, max(W1, W2) > d)
        // = P(W1 > d).
        let ta = [0.0, 1.0];
        let tb = [1.0, 2.0];
        let c = PairChain {
            rate_a: 1.0,
            rate_b: 1.0,
            rate_ab: 1.0,
            times_a: &ta,
            times_b: &tb,
            d_a: 0.8,
            d_b: 0.8,
        };
        assert!((c.joint_crossing(1.0) - std_normal_sf(0.8)).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_single_steps_factorize() {
        // Independent projections: both cross iff A(1) > d_a and B crosses
        // at t = 1 or t = 2.
        let ta = [0.0, 1.0];
        let tb = [1.0, 2.0];
        let c = PairChain {
            rate_a: 1.0,
            rate_b: 1.0,
            rate_ab: 0.0,
            times_a: &ta,
            times_b: &tb,
            d_a: 0.5,
            d_b: 0.9,
        };
        let p_b = std_normal_sf(0.9) + std_normal_sf(0.9 / 2f64.sqrt())
            - bivariate_normal_upper(0.9, 0.9 / 2f64.sqrt(), 1.0 / 2f64.sqrt());
        let want = std_normal_sf(0.5) * p_b;
        assert!(
            (c.joint_crossing(1.0) - want).abs() < 1e-11,
            "{} vs {want}",
            c.joint_crossing(1.0)
        );
    }
}
