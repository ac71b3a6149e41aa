//! Standard normal distribution function and quantiles.
//!
//! `Phi(x) = erfc(-x / sqrt 2) / 2`, with `erfc` from `libm` (the FreeBSD
//! msun rational approximations, absolute error well below `1e-15`). Every
//! normal-CDF computation in the crate goes through [`cdf`], and quantiles
//! are obtained by bisection on it.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

/// Inverts a nondecreasing `f` on `[lo, hi]` by bisection until the bracket
/// stops shrinking in floating point.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal quantile for `p` in `(0, 1)`.
pub fn quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile probability out of range: {p}");
    bisect(cdf, p, -40.0, 40.0)
}

/// The median of `|g|` for standard normal `g`: the `alpha` with `Phi(alpha) = 3/4`.
pub fn gaussian_abs_median() -> f64 {
    quantile(0.75)
}

/// `Pr(|g| <= t)`.
pub fn abs_cdf(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        cdf(t) - cdf(-t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_median_value() {
        let a = gaussian_abs_median();
        assert!((a - 0.6744897502).abs() < 1e-9);
        assert!((abs_cdf(a) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn cdf_agrees_with_statrs() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = Normal::new(0.0, 1.0).unwrap();
        for i in -80..=80 {
            let x = i as f64 * 0.1;
            // statrs' own erfc is only good to about 1e-12 here.
            assert!((cdf(x) - n.cdf(x)).abs() < 1e-10, "x = {x}");
        }
        for p in [1e-6, 0.01, 0.3, 0.5, 0.75, 0.975, 1.0 - 1e-6] {
            assert!((quantile(p) - n.inverse_cdf(p)).abs() < 1e-8, "p = {p}");
        }
    }

    #[test]
    fn cdf_reference_values() {
        // Phi(-2), Phi(-1), Phi(1.96) from 0.5 * erfc(-x / sqrt 2) in CPython.
        assert!((cdf(-2.0) - 0.022750131948179195).abs() < 1e-16);
        assert!((cdf(-1.0) - 0.15865525393145707).abs() < 1e-16);
        assert!((cdf(1.96) - 0.9750021048517795).abs() < 1e-15);
    }

    #[test]
    fn abs_median_monte_carlo_cross_check() {
        let mut rng = crate::RngStream::new(99, 1).rng();
        let mut v: Vec<f64> = (0..10_000_000).map(|_| rng.normal().abs()).collect();
        let n = v.len();
        let med = crate::util::kth_smallest(&mut v, n / 2);
        // Median standard error: sqrt(1/4n) / (2 phi(alpha)).
        let se = (0.25 / n as f64).sqrt() / (2.0 * pdf(gaussian_abs_median()));
        assert!((med - gaussian_abs_median()).abs() < 4.0 * se);
    }
}
