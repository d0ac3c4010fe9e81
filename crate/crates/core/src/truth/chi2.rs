//! Chi-squared distribution function and its inverse.

use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};

/// P(X ≤ x) for X ~ χ²(df).
pub fn chi2_cdf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(df / 2.0, x / 2.0)
    }
}

/// Inverse CDF: the x with `chi2_cdf(x, df) = p`, found by bisection to an
/// absolute tolerance well below 1e-6.
pub fn chi2_quantile(p: f64, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Config(format!("quantile level must lie in (0,1), got {p}")));
    }
    if !(df > 0.0) || !df.is_finite() {
        return Err(Error::Config(format!("degrees of freedom must be positive, got {df}")));
    }
    let mut lo = 0.0;
    let mut hi = df.max(1.0);
    while chi2_cdf(hi, df) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Upper-tail critical value: the x with P(X > x) = `a`.
pub fn chi2_upper_critical(a: f64, df: f64) -> Result<f64> {
    chi2_quantile(1.0 - a, df)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_of_two_degrees_is_exponential() {
        for x in [0.1, 1.0, 3.0, 10.0] {
            let expected = 1.0 - (-x / 2.0f64).exp();
            assert!((chi2_cdf(x, 2.0) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for df in [1.0, 4.0, 17.0] {
            for p in [0.01, 0.5, 0.99] {
                let x = chi2_quantile(p, df).unwrap();
                assert!((chi2_cdf(x, df) - p).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn bad_arguments_rejected() {
        assert!(chi2_quantile(0.0, 3.0).is_err());
        assert!(chi2_quantile(1.0, 3.0).is_err());
        assert!(chi2_quantile(0.5, 0.0).is_err());
    }
}
