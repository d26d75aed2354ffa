use std::f64::consts::PI;

use brisk_core::gaussian::{
    bivariate_normal_cdf, bivariate_normal_upper, mvn_cdf, std_normal_cdf, std_normal_inv_cdf, std_normal_pdf,
    GaussianError, GaussianVector, MvnOptions,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// `∫ φ(x)·Φ((k − ρx)/√(1 − ρ²)) dx` over `x ≤ h`, by composite Simpson.
fn bvn_quadrature(h: f64, k: f64, rho: f64) -> f64 {
    let lo = -10.0;
    let n = 20_000;
    let step = (h - lo) / n as f64;
    let f = |x: f64| std_normal_pdf(x) * std_normal_cdf((k - rho * x) / (1.0 - rho * rho).sqrt());
    let mut sum = f(lo) + f(h);
    for i in 1..n {
        sum += f(lo + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * step / 3.0
}

#[test]
fn bivariate_matches_quadrature() {
    for &(h, k, rho) in &[
        (0.0, 0.0, 0.5),
        (1.2, -0.4, -0.7),
        (-2.0, 1.5, 0.9),
        (2.5, 2.5, 0.99),
        (-1.0, -1.0, -0.3),
    ] {
        let exact = bvn_quadrature(h, k, rho);
        assert!((bivariate_normal_cdf(h, k, rho) - exact).abs() < 1e-10, "{h} {k} {rho}");
    }
}

#[test]
fn quadrant_probability_has_closed_form() {
    for rho in [-0.9f64, -0.3, 0.0, 0.4, 0.95] {
        let expected = 0.25 + rho.asin() / (2.0 * PI);
        assert!((bivariate_normal_upper(0.0, 0.0, rho) - expected).abs() < 1e-14);
    }
}

#[test]
fn equicorrelated_orthant() {
    // P(all three positive) with pairwise correlation ½ is 1/8 + 3·asin(½)/(4π) = 1/4.
    let cov = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.5 });
    let g = GaussianVector::new(cov).unwrap();
    let opts = MvnOptions {
        target_abs_err: 1e-5,
        max_points: 1_000_000,
        shifts: 8,
    };
    let est = mvn_cdf(&g, &[0.0; 3], &[f64::INFINITY; 3], &opts).unwrap();
    assert!(est.err <= 1e-5);
    assert!((est.prob - 0.25).abs() <= 3.0 * est.err);
}

#[test]
fn independent_coordinates_factor() {
    let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0, 0.25, 9.0]));
    let g = GaussianVector::new(cov).unwrap();
    let lo = [-1.0, -1.0, f64::NEG_INFINITY, 0.5];
    let hi = [0.5, 3.0, 0.2, f64::INFINITY];
    let sd = [1.0, 2.0, 0.5, 3.0];
    let expected: f64 = (0..4)
        .map(|i| std_normal_cdf(hi[i] / sd[i]) - std_normal_cdf(lo[i] / sd[i]))
        .product();
    let est = mvn_cdf(&g, &lo, &hi, &MvnOptions::default()).unwrap();
    assert!((est.prob - expected).abs() <= est.err.max(1e-6));
}

#[test]
fn singular_covariance_merges_coordinates() {
    // The second coordinate is an exact copy of the first.
    let cov = DMatrix::from_element(2, 2, 1.0);
    let g = GaussianVector::new(cov).unwrap();
    let est = mvn_cdf(&g, &[-1.0, -0.5], &[2.0, 1.0], &MvnOptions::default()).unwrap();
    assert!((est.prob - (std_normal_cdf(1.0) - std_normal_cdf(-0.5))).abs() < 1e-12);
}

#[test]
fn invalid_inputs_are_rejected() {
    let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(matches!(
        GaussianVector::new(bad),
        Err(GaussianError::NotPositiveSemidefinite { .. })
    ));
    let g = GaussianVector::new(DMatrix::identity(2, 2)).unwrap();
    assert!(matches!(
        mvn_cdf(&g, &[0.0, 1.0], &[1.0, 1.0], &MvnOptions::default()),
        Err(GaussianError::InvalidBounds { index: 1 })
    ));
}

proptest! {
    #[test]
    fn inverse_cdf_round_trips(p in 1e-12..1.0f64) {
        prop_assume!(p < 1.0 - 1e-12);
        let x = std_normal_inv_cdf(p);
        prop_assert!((std_normal_cdf(x) - p).abs() <= 1e-13 * p.max(1e-3));
    }

    #[test]
    fn bivariate_is_symmetric_and_bounded(h in -4.0..4.0f64, k in -4.0..4.0f64, rho in -0.999..0.999f64) {
        let a = bivariate_normal_cdf(h, k, rho);
        let b = bivariate_normal_cdf(k, h, rho);
        prop_assert!((a - b).abs() < 1e-14);
        // Fréchet bounds.
        let (ph, pk) = (std_normal_cdf(h), std_normal_cdf(k));
        prop_assert!(a <= ph.min(pk) + 1e-14);
        prop_assert!(a >= (ph + pk - 1.0).max(0.0) - 1e-14);
    }
}
