//! Scalar standard-normal distribution helpers.

use std::f64::consts::FRAC_1_SQRT_2;

/// `Φ(x)`, the standard normal CDF.
///
/// Evaluated through `erfc` so that the left tail keeps full relative
/// precision; absolute error is at the level of a few ulps.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `1 - Φ(x)`, computed without cancellation in the right tail.
#[inline]
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Inverse of `Φ` (Wichura's AS 241, `PPND16`), relative accuracy about 1e-16.
///
/// Returns `±∞` at the endpoints and NaN outside `[0, 1]`.
#[allow(clippy::inconsistent_digit_grouping, clippy::excessive_precision)]
pub fn std_normal_inv_cdf(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r + 67265.770_927_008_7) * r
                + 45921.953_931_549_87)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545 * r + 28729.085_735_721_943) * r + 39307.895_800_092_71) * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }

    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r + 0.241_780_725_177_450_6) * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r + 0.001_242_660_947_388_078_4) * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent evaluation: Taylor series of `erf` for moderate arguments,
    /// summed with enough terms to reach double precision.
    fn cdf_by_series(x: f64) -> f64 {
        // Φ(x) = 1/2 + φ(x) Σ x^(2n+1) / (1·3·5···(2n+1))
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) {
            n += 1.0;
            term *= x * x / (2.0 * n + 1.0);
            sum += term;
        }
        0.5 + std_normal_pdf(x) * sum
    }

    #[test]
    fn zero_is_one_half() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
    }

    #[test]
    fn far_right_tail_saturates() {
        assert!(std_normal_cdf(8.0) > 1.0 - 1e-14);
        assert!(std_normal_sf(8.0) > 0.0);
    }

    #[test]
    fn quantile_of_975_percent() {
        // Bisection on the series evaluation, independent of erfc.
        let (mut lo, mut hi) = (1.9, 2.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if cdf_by_series(mid) < 0.975 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 1.959964).abs() < 1e-6);
        assert!((std_normal_cdf(1.959964) - 0.975).abs() < 1e-6);
    }

    #[test]
    fn matches_series_on_a_grid() {
        for i in -60..=60 {
            let x = i as f64 * 0.1;
            assert!((std_normal_cdf(x) - cdf_by_series(x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn inverse_round_trips() {
        for &p in &[1e-300, 1e-20, 1e-8, 0.001, 0.02425, 0.3, 0.5, 0.7, 0.975, 0.999_999] {
            let x = std_normal_inv_cdf(p);
            let back = std_normal_cdf(x);
            assert!((back - p).abs() <= 1e-14 * p.max(1e-300) + 1e-16, "p = {p}");
        }
        assert_eq!(std_normal_inv_cdf(0.0), f64::NEG_INFINITY);
        assert_eq!(std_normal_inv_cdf(1.0), f64::INFINITY);
        assert!(std_normal_inv_cdf(1.5).is_nan());
    }
}
