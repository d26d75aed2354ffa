//! Rectangle probabilities of mean-zero multivariate normals.
//!
//! Dimensions one and two are evaluated in closed form. Higher dimensions use
//! Genz's separation-of-variables transform on a pivoted Cholesky factor,
//! integrated with a randomly shifted rank-1 lattice rule. The shifts come
//! from a fixed seed, so every call is bit-reproducible.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bivariate::bivariate_normal_cdf;
use super::univariate::{std_normal_cdf, std_normal_inv_cdf, std_normal_pdf, std_normal_sf};
use super::{GaussianError, GaussianVector};

const LATTICE_SEED: u64 = 0x6272_6973_6b2f_0001;

/// Variances at or below this fraction of the largest variance are treated as
/// exactly zero.
const ZERO_VARIANCE_REL: f64 = 1e-14;

/// Conditional variances at or below this fraction of the unconditional
/// variance mark a coordinate as a deterministic function of earlier ones.
const SINGULAR_REL: f64 = 1e-10;

/// Squared correlations this close to one are merged into a single coordinate.
const COLLINEAR_REL: f64 = 1e-12;

/// Smallest per-shift point count before the error estimate is trusted.
const MIN_POINTS_PER_SHIFT: usize = 256;

/// Error reported for the closed-form bivariate path.
const BIVARIATE_ERR: f64 = 1e-12;

/// Sampling controls for [`mvn_cdf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvnOptions {
    /// Requested absolute error of the probability.
    pub target_abs_err: f64,
    /// Total lattice points across all shifts before giving up.
    pub max_points: usize,
    /// Number of independent random shifts used for the error estimate.
    pub shifts: usize,
}

impl Default for MvnOptions {
    fn default() -> Self {
        Self {
            target_abs_err: 1e-6,
            max_points: 100_000,
            shifts: 8,
        }
    }
}

impl MvnOptions {
    pub fn with_tolerance(target_abs_err: f64) -> Self {
        Self {
            target_abs_err,
            ..Self::default()
        }
    }
}

/// A probability together with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvnEstimate {
    pub prob: f64,
    pub err: f64,
}

impl MvnEstimate {
    fn exact(prob: f64) -> Self {
        Self { prob, err: 0.0 }
    }
}

/// `P(lower ≤ X ≤ upper)` for `X ~ N(0, Σ)`.
///
/// Bounds may be infinite. Zero-variance coordinates are removed first: the
/// coordinate is dropped when `0 ∈ [lower, upper]` and the whole probability
/// is exactly zero otherwise. Perfectly correlated coordinates are merged by
/// intersecting their implied intervals.
///
/// When the error estimate is still above `opts.target_abs_err` after
/// `opts.max_points` points, [`GaussianError::NotConverged`] is returned and
/// carries the best estimate reached.
pub fn mvn_cdf(
    g: &GaussianVector,
    lower: &[f64],
    upper: &[f64],
    opts: &MvnOptions,
) -> Result<MvnEstimate, GaussianError> {
    let k = g.dim();
    if lower.len() != k || upper.len() != k {
        return Err(GaussianError::DimensionMismatch {
            expected: k,
            lower: lower.len(),
            upper: upper.len(),
        });
    }
    for i in 0..k {
        if lower[i].is_nan() || upper[i].is_nan() || !(lower[i] < upper[i]) {
            return Err(GaussianError::InvalidBounds { index: i });
        }
    }

    let Some(problem) = Reduced::new(g.covariance(), lower, upper) else {
        return Ok(MvnEstimate::exact(0.0));
    };
    match problem.dim() {
        0 => Ok(MvnEstimate::exact(1.0)),
        1 => {
            let s = problem.cov[(0, 0)].sqrt();
            Ok(MvnEstimate::exact(normal_interval(
                problem.lower[0] / s,
                problem.upper[0] / s,
            )))
        }
        2 => Ok(MvnEstimate {
            prob: bivariate_rectangle(&problem),
            err: BIVARIATE_ERR,
        }),
        _ => genz_lattice(&problem, opts),
    }
}

/// `Φ(b) − Φ(a)` without cancellation on either tail.
pub fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        (std_normal_sf(a) - std_normal_sf(b)).max(0.0)
    } else if b <= 0.0 {
        (std_normal_cdf(b) - std_normal_cdf(a)).max(0.0)
    } else {
        (1.0 - std_normal_cdf(a) - std_normal_sf(b)).max(0.0)
    }
}

/// The problem left after dropping free, deterministic and duplicated
/// coordinates.
struct Reduced {
    cov: DMatrix<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Reduced {
    /// `None` means the rectangle has probability exactly zero.
    fn new(cov: &DMatrix<f64>, lower: &[f64], upper: &[f64]) -> Option<Self> {
        let k = cov.nrows();
        let max_var = (0..k).map(|i| cov[(i, i)]).fold(0.0, f64::max);
        let zero_var = ZERO_VARIANCE_REL * max_var;

        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        let mut keep = Vec::with_capacity(k);
        for i in 0..k {
            if lo[i] == f64::NEG_INFINITY && hi[i] == f64::INFINITY {
                continue;
            }
            if cov[(i, i)] <= zero_var {
                if lo[i] <= 0.0 && 0.0 <= hi[i] {
                    continue;
                }
                return None;
            }
            keep.push(i);
        }

        // Merge coordinates that are exact multiples of an earlier kept one.
        let mut merged: Vec<usize> = Vec::with_capacity(keep.len());
        'outer: for &j in &keep {
            for &i in &merged {
                let (vi, vj, cij) = (cov[(i, i)], cov[(j, j)], cov[(i, j)]);
                if cij * cij >= (1.0 - COLLINEAR_REL) * vi * vj {
                    // x_j = s x_i
                    let s = cij / vi;
                    let (a, b) = if s > 0.0 {
                        (lo[j] / s, hi[j] / s)
                    } else {
                        (hi[j] / s, lo[j] / s)
                    };
                    lo[i] = lo[i].max(a);
                    hi[i] = hi[i].min(b);
                    if lo[i] >= hi[i] {
                        return None;
                    }
                    continue 'outer;
                }
            }
            merged.push(j);
        }

        let m = merged.len();
        let cov = DMatrix::from_fn(m, m, |r, c| cov[(merged[r], merged[c])]);
        Some(Self {
            cov,
            lower: merged.iter().map(|&i| lo[i]).collect(),
            upper: merged.iter().map(|&i| hi[i]).collect(),
        })
    }

    fn dim(&self) -> usize {
        self.lower.len()
    }
}

fn bivariate_rectangle(p: &Reduced) -> f64 {
    let s0 = p.cov[(0, 0)].sqrt();
    let s1 = p.cov[(1, 1)].sqrt();
    let rho = (p.cov[(0, 1)] / (s0 * s1)).clamp(-1.0, 1.0);
    let (a0, b0) = (p.lower[0] / s0, p.upper[0] / s0);
    let (a1, b1) = (p.lower[1] / s1, p.upper[1] / s1);
    let f = |h: f64, k: f64| {
        if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
            0.0
        } else {
            bivariate_normal_cdf(h, k, rho)
        }
    };
    (f(b0, b1) - f(a0, b1) - f(b0, a1) + f(a0, a1)).clamp(0.0, 1.0)
}

/// Pivoted Cholesky factor in Genz–Bretz priority order.
struct Factor {
    /// Lower-triangular rows; row `i` uses columns `0..min(i, rank)`.
    chol: DMatrix<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Rows at index `rank..` have no residual variance and act as indicator
    /// constraints on the earlier coordinates.
    rank: usize,
}

impl Factor {
    fn new(p: &Reduced) -> Self {
        let m = p.dim();
        let mut cov = p.cov.clone();
        let mut lower = p.lower.clone();
        let mut upper = p.upper.clone();
        let mut chol = DMatrix::<f64>::zeros(m, m);
        let mut y = vec![0.0; m];
        let mut rank = m;

        for i in 0..m {
            // Choose the remaining coordinate with the smallest conditional
            // interval probability.
            let mut best: Option<(usize, f64, f64)> = None;
            for j in i..m {
                let resid = cov[(j, j)] - (0..i).map(|l| chol[(j, l)] * chol[(j, l)]).sum::<f64>();
                if resid <= SINGULAR_REL * cov[(j, j)] {
                    continue;
                }
                let sd = resid.sqrt();
                let shift: f64 = (0..i).map(|l| chol[(j, l)] * y[l]).sum();
                let prob = normal_interval((lower[j] - shift) / sd, (upper[j] - shift) / sd);
                if best.is_none_or(|(_, bp, _)| prob < bp) {
                    best = Some((j, prob, resid));
                }
            }
            let Some((j, _, resid)) = best else {
                rank = i;
                break;
            };

            if j != i {
                cov.swap_rows(i, j);
                cov.swap_columns(i, j);
                chol.swap_rows(i, j);
                lower.swap(i, j);
                upper.swap(i, j);
            }

            let cii = resid.sqrt();
            chol[(i, i)] = cii;
            for r in (i + 1)..m {
                let dot: f64 = (0..i).map(|l| chol[(r, l)] * chol[(i, l)]).sum();
                chol[(r, i)] = (cov[(r, i)] - dot) / cii;
            }

            let shift: f64 = (0..i).map(|l| chol[(i, l)] * y[l]).sum();
            let a = (lower[i] - shift) / cii;
            let b = (upper[i] - shift) / cii;
            let mass = normal_interval(a, b);
            y[i] = if mass > 1e-300 {
                (pdf_or_zero(a) - pdf_or_zero(b)) / mass
            } else if a.is_finite() {
                a
            } else {
                b
            };
        }

        for r in rank..m {
            for c in rank..m {
                chol[(r, c)] = 0.0;
            }
        }
        Self {
            chol,
            lower,
            upper,
            rank,
        }
    }

    fn dim(&self) -> usize {
        self.lower.len()
    }
}

fn pdf_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        std_normal_pdf(x)
    } else {
        0.0
    }
}

/// Integrand of the separation-of-variables transform at one point of
/// `[0, 1]^(rank - 1)` (plus one extra coordinate when singular rows exist).
struct Integrand<'a> {
    factor: &'a Factor,
    w: Vec<f64>,
}

impl<'a> Integrand<'a> {
    fn new(factor: &'a Factor) -> Self {
        Self {
            factor,
            w: vec![0.0; factor.rank],
        }
    }

    fn qmc_dim(&self) -> usize {
        let f = self.factor;
        if f.rank < f.dim() {
            f.rank
        } else {
            f.rank - 1
        }
    }

    fn eval(&mut self, u: &[f64]) -> f64 {
        let f = self.factor;
        let c = &f.chol;
        let mut value = 1.0;
        for i in 0..f.rank {
            let shift: f64 = (0..i).map(|l| c[(i, l)] * self.w[l]).sum();
            let cii = c[(i, i)];
            let a = (f.lower[i] - shift) / cii;
            let b = (f.upper[i] - shift) / cii;
            let width = normal_interval(a, b);
            value *= width;
            if value == 0.0 {
                return 0.0;
            }
            if i < u.len() {
                self.w[i] = truncated_normal_quantile(a, b, u[i]);
            }
        }
        for r in f.rank..f.dim() {
            let s: f64 = (0..f.rank).map(|l| c[(r, l)] * self.w[l]).sum();
            let slack = 1e-12 * (1.0 + s.abs());
            if s < f.lower[r] - slack || s > f.upper[r] + slack {
                return 0.0;
            }
        }
        value
    }
}

/// Quantile `u` of a standard normal truncated to `[a, b]`, inverting on the
/// tail that keeps precision.
fn truncated_normal_quantile(a: f64, b: f64, u: f64) -> f64 {
    const LO: f64 = f64::MIN_POSITIVE;
    const HI: f64 = 1.0 - f64::EPSILON / 2.0;
    if a > 0.0 {
        let sa = std_normal_sf(a);
        let sb = if b == f64::INFINITY { 0.0 } else { std_normal_sf(b) };
        -std_normal_inv_cdf((sa - u * (sa - sb)).clamp(LO, HI))
    } else {
        let d = if a == f64::NEG_INFINITY { 0.0 } else { std_normal_cdf(a) };
        let e = if b == f64::INFINITY { 1.0 } else { std_normal_cdf(b) };
        std_normal_inv_cdf((d + u * (e - d)).clamp(LO, HI))
    }
}

fn genz_lattice(p: &Reduced, opts: &MvnOptions) -> Result<MvnEstimate, GaussianError> {
    let factor = Factor::new(p);
    let mut integrand = Integrand::new(&factor);
    let dim = integrand.qmc_dim();

    if dim == 0 {
        // Single non-degenerate coordinate with no indicator rows.
        return Ok(MvnEstimate::exact(integrand.eval(&[]).clamp(0.0, 1.0)));
    }

    let generator: Vec<f64> = first_primes(dim).iter().map(|&q| (q as f64).sqrt().fract()).collect();
    let n_shifts = opts.shifts.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(LATTICE_SEED);
    let shifts: Vec<Vec<f64>> = (0..n_shifts)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();

    let mut sums = vec![0.0; n_shifts];
    let mut n = 0usize;
    let mut batch = MIN_POINTS_PER_SHIFT;
    let budget_per_shift = (opts.max_points / n_shifts).max(MIN_POINTS_PER_SHIFT);
    let mut u = vec![0.0; dim];
    let mut estimate;

    loop {
        let end = (n + batch).min(budget_per_shift);
        for (s, shift) in shifts.iter().enumerate() {
            let mut acc = 0.0;
            for idx in (n + 1)..=end {
                let kk = idx as f64;
                for (d, ud) in u.iter_mut().enumerate() {
                    let x = (kk * generator[d] + shift[d]).fract();
                    // Baker's transform periodizes the integrand.
                    *ud = (2.0 * x - 1.0).abs();
                }
                acc += integrand.eval(&u);
            }
            sums[s] += acc;
        }
        n = end;

        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        let mean = means.iter().sum::<f64>() / n_shifts as f64;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n_shifts * (n_shifts - 1)) as f64;
        estimate = MvnEstimate {
            prob: mean.clamp(0.0, 1.0),
            err: 3.0 * var.sqrt(),
        };

        if estimate.err <= opts.target_abs_err {
            return Ok(estimate);
        }
        if n >= budget_per_shift {
            return Err(GaussianError::NotConverged { estimate });
        }
        batch = n;
    }
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}
