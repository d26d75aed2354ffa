//! Bivariate standard normal probabilities.
//!
//! The core routine follows Drezner and Wesolowsky's Gauss–Legendre
//! integration over the correlation, with Genz's modifications for double
//! precision and for `|rho|` close to one. Upper-orthant probabilities are the
//! primitive because every caller in this crate needs right tails, where
//! subtracting from one would lose all relative precision.

use std::f64::consts::PI;

use super::univariate::{std_normal_cdf, std_normal_sf};

const TWO_PI: f64 = 2.0 * PI;

// (weight, abscissa) pairs on [-1, 0); the symmetric half is generated by the loop.
const GL6: [(f64, f64); 3] = [
    (0.171_324_492_379_170_5, -0.932_469_514_203_152_1),
    (0.360_761_573_048_138_4, -0.661_209_386_466_264_5),
    (0.467_913_934_572_691, -0.238_619_186_083_197),
];

const GL12: [(f64, f64); 6] = [
    (0.047_175_336_386_511_77, -0.981_560_634_246_719_1),
    (0.106_939_325_995_318_3, -0.904_117_256_370_475),
    (0.160_078_328_543_346_4, -0.769_902_674_194_305),
    (0.203_167_426_723_065_9, -0.587_317_954_286_617_1),
    (0.233_492_536_538_354_7, -0.367_831_498_998_180_2),
    (0.249_147_045_813_402_9, -0.125_233_408_511_469_2),
];

const GL20: [(f64, f64); 10] = [
    (0.017_614_007_139_152_12, -0.993_128_599_185_094_9),
    (0.040_601_429_800_386_94, -0.963_971_927_277_913_8),
    (0.062_672_048_334_109_06, -0.912_234_428_251_325_9),
    (0.083_276_741_576_704_75, -0.839_116_971_822_218_8),
    (0.101_930_119_817_240_4, -0.746_331_906_460_150_8),
    (0.118_194_531_961_518_4, -0.636_053_680_726_515),
    (0.131_688_638_449_176_6, -0.510_867_001_950_827_1),
    (0.142_096_109_318_382_1, -0.373_706_088_715_419_6),
    (0.149_172_986_472_603_7, -0.227_785_851_141_645_1),
    (0.152_753_387_130_725_9, -0.076_526_521_133_497_33),
];

fn quadrature(rho_abs: f64) -> &'static [(f64, f64)] {
    if rho_abs < 0.3 {
        &GL6
    } else if rho_abs < 0.75 {
        &GL12
    } else {
        &GL20
    }
}

/// `P(Z1 > h, Z2 > k)` for standard normals with correlation `rho`.
///
/// `rho` is clamped to `[-1, 1]`; infinite limits are handled exactly.
pub fn bivariate_normal_upper(h: f64, k: f64, rho: f64) -> f64 {
    let rho = rho.clamp(-1.0, 1.0);
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return std_normal_sf(k);
    }
    if k == f64::NEG_INFINITY {
        return std_normal_sf(h);
    }
    if rho == 1.0 {
        return std_normal_sf(h.max(k));
    }
    if rho == -1.0 {
        // P(Z > h, -Z > k) = P(h < Z < -k)
        return if -k > h { interval_mass(h, -k) } else { 0.0 };
    }
    genz_bvnu(h, k, rho)
}

/// `P(Z1 ≤ h, Z2 ≤ k)` for standard normals with correlation `rho`.
///
/// At `|rho| = 1` this reduces to the exact degenerate forms
/// `Φ(min(h, k))` and `max(0, Φ(h) − Φ(−k))`.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    bivariate_normal_upper(-h, -k, rho)
}

/// `P(a < Z < b)` for a standard normal, evaluated on the side of zero that
/// avoids cancellation.
fn interval_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        std_normal_sf(a) - std_normal_sf(b)
    } else if b <= 0.0 {
        std_normal_cdf(b) - std_normal_cdf(a)
    } else {
        1.0 - std_normal_cdf(a) - std_normal_sf(b)
    }
}

fn genz_bvnu(h: f64, k: f64, r: f64) -> f64 {
    let quad = quadrature(r.abs());
    let mut hk = h * k;

    if r.abs() < 0.925 {
        let mut bvn = 0.0;
        let hs = 0.5 * (h * h + k * k);
        let asr = r.asin();
        for &(w, x) in quad {
            for s in [-1.0, 1.0] {
                let sn = (0.5 * asr * (s * x + 1.0)).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / (2.0 * TWO_PI);
        return (bvn + std_normal_sf(h) * std_normal_sf(k)).clamp(0.0, 1.0);
    }

    // |r| close to one: expand around the comonotone limit of (h, ±k).
    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    let mut bvn = 0.0;
    let r_abs = r.abs();
    if r_abs < 1.0 {
        let a_s = (1.0 - r_abs) * (1.0 + r_abs);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let asr = -0.5 * (b_s / a_s + hk);
        if asr > -100.0 {
            bvn = a * asr.exp() * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        }
        if hk > -160.0 {
            let b = b_s.sqrt();
            bvn -= (-0.5 * hk).exp()
                * TWO_PI.sqrt()
                * std_normal_cdf(-b / a)
                * b
                * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a *= 0.5;
        for &(w, x) in quad {
            for s in [-1.0, 1.0] {
                let xs = (a * (s * x + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                let asr = -0.5 * (b_s / xs + hk);
                if asr > -100.0 {
                    bvn += a
                        * w
                        * asr.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / TWO_PI;
    }
    let bvn = if r > 0.0 {
        bvn + std_normal_sf(h.max(k))
    } else {
        let mut v = -bvn;
        if k > h {
            v += interval_mass(h, k);
        }
        v
    };
    bvn.clamp(0.0, 1.0)
}
