//! Numerical check of the closed-form marginal over source variances.

use statrs::function::gamma::ln_gamma;

use super::model::{squared_deviation, ClaimSet, SourceStats};
use crate::error::{Error, Result};

const QUAD_STEP: f64 = 0.005;
const QUAD_HALF_WIDTH: f64 = 80.0;

/// Log of the closed-form marginal likelihood of source `s`'s observations
/// with its variance integrated out under a scaled inverse chi-squared prior.
pub fn log_marginal_closed_form(set: &ClaimSet, s: usize, st: &SourceStats, z: &[f64]) -> f64 {
    let n = set.by_source[s].len() as f64;
    let (nu, tau2) = (st.nu, st.tau2);
    let dev = squared_deviation(set, s, z);
    0.5 * nu * (0.5 * tau2 * nu).ln() + ln_gamma(0.5 * (nu + n))
        - ln_gamma(0.5 * nu)
        - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
        - 0.5 * (nu + n) * (0.5 * (nu * tau2 + dev)).ln()
}

fn log_inv_chi2_density(w: f64, nu: f64, tau2: f64) -> f64 {
    0.5 * nu * (0.5 * tau2 * nu).ln() - ln_gamma(0.5 * nu) - (1.0 + 0.5 * nu) * w.ln() - nu * tau2 / (2.0 * w)
}

/// Log of the same marginal computed by trapezoidal quadrature over
/// t = ln ω of the normal likelihood times the variance prior.
pub fn log_marginal_quadrature(set: &ClaimSet, s: usize, st: &SourceStats, z: &[f64]) -> Result<f64> {
    if !(st.nu > 0.0 && st.tau2 > 0.0) {
        return Err(Error::Quadrature(format!(
            "improper variance prior (nu={}, tau2={})",
            st.nu, st.tau2
        )));
    }
    let n = set.by_source[s].len() as f64;
    let dev = squared_deviation(set, s, z);
    let log_integrand = |t: f64| {
        let w = t.exp();
        -0.5 * n * (2.0 * std::f64::consts::PI * w).ln() - dev / (2.0 * w)
            + log_inv_chi2_density(w, st.nu, st.tau2)
            + t
    };
    // Centre the grid on the mode of the posterior over ω.
    let centre = ((st.nu * st.tau2 + dev) / (st.nu + n + 2.0)).ln();
    let steps = (2.0 * QUAD_HALF_WIDTH / QUAD_STEP) as usize;
    let values: Vec<f64> = (0..=steps)
        .map(|i| log_integrand(centre - QUAD_HALF_WIDTH + i as f64 * QUAD_STEP))
        .collect();
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Quadrature("integrand is not finite".into()));
    }
    let edge = values[0].max(values[steps]);
    if edge - max > -30.0 {
        return Err(Error::Quadrature("integrand not negligible at the grid edge".into()));
    }
    let sum: f64 = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let wgt = if i == 0 || i == steps { 0.5 } else { 1.0 };
            wgt * (v - max).exp()
        })
        .sum();
    Ok(max + (sum * QUAD_STEP).ln())
}

/// Largest relative difference, across sources with claims, between the
/// closed-form and quadrature marginals. The beta prior on the truths is
/// common to both sides and cancels. Zero for an instance with no claims.
pub fn conjugacy_check(set: &ClaimSet, stats: &[SourceStats], z: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (s, st) in stats.iter().enumerate() {
        if set.by_source[s].is_empty() {
            continue;
        }
        let closed = log_marginal_closed_form(set, s, st, z);
        let quad = log_marginal_quadrature(set, s, st, z)?;
        worst = worst.max((quad - closed).exp_m1().abs());
    }
    Ok(worst)
}
