use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::chi2::chi2_quantile;
use crate::error::{Error, Result};
use crate::kb::FactKey;
use crate::source_sim::Claim;

/// Latent truths are kept inside (DELTA, 1 - DELTA).
pub const DELTA: f64 = 1e-6;

/// Lower bound on prior source variances.
pub const TAU2_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruthConfig {
    /// Beta prior pseudo-counts (true, false).
    pub beta: (f64, f64),
    /// Significance level of the variance confidence interval.
    pub alpha: f64,
    /// Truth threshold.
    pub epsilon: f64,
    /// Initial step of the backtracking line search.
    pub step_size: f64,
    pub max_iterations: usize,
    /// Stop when the logit-space gradient norm falls below this.
    pub tolerance: f64,
    pub use_ci_estimator: bool,
    pub use_prior_truths: bool,
    /// Re-estimate source variances from inferred truths and re-run this many times.
    pub refine_rounds: usize,
    /// Share of popular users with two or more values that makes a property multi-valued.
    pub multi_value_share: f64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        TruthConfig {
            beta: (5.0, 5.0),
            alpha: 0.05,
            epsilon: 0.5,
            step_size: 1.0,
            max_iterations: 5000,
            tolerance: 1e-6,
            use_ci_estimator: true,
            use_prior_truths: true,
            refine_rounds: 1,
            multi_value_share: 0.1,
        }
    }
}

impl TruthConfig {
    pub fn validate(&self) -> Result<()> {
        let (b1, b0) = self.beta;
        if !(b1 > 0.0 && b0 > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got ({b1}, {b0})")));
        }
        for (name, v) in [("alpha", self.alpha), ("epsilon", self.epsilon)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0,1), got {v}")));
            }
        }
        if !(self.step_size > 0.0) || !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config(
                "step_size, tolerance and max_iterations must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.multi_value_share) {
            return Err(Error::Config("multi_value_share must lie in [0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexedClaim {
    pub fact: usize,
    pub source: usize,
    pub observation: f64,
}

/// Claims indexed by fact and by source. Facts and sources are kept in
/// sorted order; at most one claim per (fact, source), duplicates merged by max.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimSet {
    pub facts: Vec<FactKey>,
    pub sources: Vec<String>,
    pub claims: Vec<IndexedClaim>,
    pub by_fact: Vec<Vec<usize>>,
    pub by_source: Vec<Vec<usize>>,
}

impl ClaimSet {
    pub fn new(claims: &[Claim]) -> Result<Self> {
        Self::with_facts(claims, std::iter::empty())
    }

    /// Like [`ClaimSet::new`], additionally registering facts that may have no claims.
    pub fn with_facts(claims: &[Claim], extra: impl IntoIterator<Item = FactKey>) -> Result<Self> {
        let mut merged: BTreeMap<(&FactKey, &str), f64> = BTreeMap::new();
        for (i, c) in claims.iter().enumerate() {
            if !(0.0..=1.0).contains(&c.observation) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("observation {} outside [0,1]", c.observation),
                });
            }
            merged
                .entry((&c.fact, c.source.as_str()))
                .and_modify(|o| *o = o.max(c.observation))
                .or_insert(c.observation);
        }
        let mut fact_set: BTreeSet<FactKey> = extra.into_iter().collect();
        fact_set.extend(claims.iter().map(|c| c.fact.clone()));
        let facts: Vec<FactKey> = fact_set.into_iter().collect();
        let sources: Vec<String> = claims
            .iter()
            .map(|c| c.source.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut set = ClaimSet {
            by_fact: vec![Vec::new(); facts.len()],
            by_source: vec![Vec::new(); sources.len()],
            claims: Vec::with_capacity(merged.len()),
            facts,
            sources,
        };
        for ((fact, source), observation) in merged {
            let f = set.fact_index(fact).expect("fact registered");
            let s = set.source_index(source).expect("source registered");
            set.by_fact[f].push(set.claims.len());
            set.by_source[s].push(set.claims.len());
            set.claims.push(IndexedClaim {
                fact: f,
                source: s,
                observation,
            });
        }
        Ok(set)
    }

    pub fn fact_index(&self, f: &FactKey) -> Option<usize> {
        self.facts.binary_search(f).ok()
    }

    pub fn source_index(&self, s: &str) -> Option<usize> {
        self.sources.binary_search_by(|x| x.as_str().cmp(s)).ok()
    }

    pub fn n_facts(&self) -> usize {
        self.facts.len()
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    /// Sources claiming fact `f`.
    pub fn sources_of(&self, f: usize) -> Vec<&str> {
        self.by_fact[f]
            .iter()
            .map(|&c| self.sources[self.claims[c].source].as_str())
            .collect()
    }

    /// Per-fact mask of membership in `prior`.
    pub fn mask(&self, prior: &BTreeSet<FactKey>) -> Vec<bool> {
        self.facts.iter().map(|f| prior.contains(f)).collect()
    }
}

/// Mean observation per fact, clamped to (DELTA, 1 - DELTA).
pub fn majority_init(set: &ClaimSet) -> Result<Vec<f64>> {
    set.by_fact
        .iter()
        .enumerate()
        .map(|(f, cs)| {
            if cs.is_empty() {
                return Err(Error::NoClaims(set.facts[f].to_string()));
            }
            let mean = cs.iter().map(|&c| set.claims[c].observation).sum::<f64>() / cs.len() as f64;
            Ok(clamp_truth(mean))
        })
        .collect()
}

pub fn clamp_truth(z: f64) -> f64 {
    z.clamp(DELTA, 1.0 - DELTA)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    /// Prior observation count.
    pub nu: f64,
    /// Prior variance.
    pub tau2: f64,
    /// Number of claims the source makes.
    pub claims: usize,
}

/// Plain sample variance of a source's observations around `z_hat`.
pub fn sample_variance(set: &ClaimSet, s: usize, z_hat: &[f64]) -> f64 {
    let cs = &set.by_source[s];
    if cs.is_empty() {
        return 0.0;
    }
    squared_deviation(set, s, z_hat) / cs.len() as f64
}

/// Σ over the source's claims of (z_f − o_fs)².
pub fn squared_deviation(set: &ClaimSet, s: usize, z: &[f64]) -> f64 {
    set.by_source[s]
        .iter()
        .map(|&c| {
            let cl = &set.claims[c];
            let d = z[cl.fact] - cl.observation;
            d * d
        })
        .sum()
}

/// Sets ν_s = |F_s| and τ²_s from the deviations of each source around
/// `z_hat`. Facts flagged in `prior` count as exactly true. With the
/// confidence-interval estimator the squared deviations are divided by the
/// lower α/2 chi-squared quantile, giving the upper end of the variance
/// interval; otherwise by |F_s|.
pub fn set_hyperparameters(
    set: &ClaimSet,
    z_hat: &[f64],
    prior: &[bool],
    cfg: &TruthConfig,
) -> Result<Vec<SourceStats>> {
    cfg.validate()?;
    let z: Vec<f64> = z_hat
        .iter()
        .zip(prior)
        .map(|(&z, &p)| if p && cfg.use_prior_truths { 1.0 } else { z })
        .collect();
    let mut out = Vec::with_capacity(set.n_sources());
    for s in 0..set.n_sources() {
        let n = set.by_source[s].len();
        if n == 0 {
            log::warn!("source {} has no claims; ignored", set.sources[s]);
            out.push(SourceStats {
                nu: 0.0,
                tau2: TAU2_FLOOR,
                claims: 0,
            });
            continue;
        }
        let dev = squared_deviation(set, s, &z);
        let denom = if cfg.use_ci_estimator {
            chi2_quantile(cfg.alpha / 2.0, n as f64)?
        } else {
            n as f64
        };
        out.push(SourceStats {
            nu: n as f64,
            tau2: (dev / denom).max(TAU2_FLOOR),
            claims: n,
        });
    }
    Ok(out)
}

fn check_truths(z: &[f64]) -> Result<()> {
    for (index, &value) in z.iter().enumerate() {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::TruthOutOfRange { index, value });
        }
    }
    Ok(())
}

/// Negative log posterior of the truths with source variances integrated
/// out, up to an additive constant.
pub fn negative_log_likelihood(
    z: &[f64],
    set: &ClaimSet,
    stats: &[SourceStats],
    beta: (f64, f64),
) -> Result<f64> {
    check_truths(z)?;
    Ok(nll_unchecked(z, set, stats, beta))
}

pub(crate) fn nll_unchecked(z: &[f64], set: &ClaimSet, stats: &[SourceStats], beta: (f64, f64)) -> f64 {
    let (b1, b0) = beta;
    let mut total: f64 = z
        .iter()
        .map(|&z| (1.0 - b1) * z.ln() + (1.0 - b0) * (1.0 - z).ln())
        .sum();
    for (s, st) in stats.iter().enumerate() {
        let n = set.by_source[s].len() as f64;
        if n == 0.0 && st.nu == 0.0 {
            continue;
        }
        let inner = st.nu * st.tau2 + squared_deviation(set, s, z);
        total += 0.5 * (st.nu + n) * (0.5 * inner).ln();
    }
    total
}

/// Gradient of [`negative_log_likelihood`] with respect to z.
pub fn nll_gradient(
    z: &[f64],
    set: &ClaimSet,
    stats: &[SourceStats],
    beta: (f64, f64),
) -> Result<Vec<f64>> {
    check_truths(z)?;
    Ok(grad_unchecked(z, set, stats, beta))
}

pub(crate) fn grad_unchecked(z: &[f64], set: &ClaimSet, stats: &[SourceStats], beta: (f64, f64)) -> Vec<f64> {
    let (b1, b0) = beta;
    let mut g: Vec<f64> = z
        .iter()
        .map(|&z| (1.0 - b1) / z - (1.0 - b0) / (1.0 - z))
        .collect();
    for (s, st) in stats.iter().enumerate() {
        let cs = &set.by_source[s];
        if cs.is_empty() {
            continue;
        }
        let inner = st.nu * st.tau2 + squared_deviation(set, s, z);
        let scale = (st.nu + cs.len() as f64) / inner;
        for &c in cs {
            let cl = &set.claims[c];
            g[cl.fact] += scale * (z[cl.fact] - cl.observation);
        }
    }
    g
}

/// Positive diagonal approximation of the Hessian in z: the magnitude of
/// the prior's curvature plus each claiming source's reliability weight.
pub(crate) fn curvature_unchecked(z: &[f64], set: &ClaimSet, stats: &[SourceStats], beta: (f64, f64)) -> Vec<f64> {
    let (b1, b0) = beta;
    let mut h: Vec<f64> = z
        .iter()
        .map(|&z| ((b1 - 1.0) / (z * z) + (b0 - 1.0) / ((1.0 - z) * (1.0 - z))).abs())
        .collect();
    for (s, w) in source_reliability(set, stats, z).into_iter().enumerate() {
        for &c in &set.by_source[s] {
            h[set.claims[c].fact] += w;
        }
    }
    h
}

/// Posterior reliability (ν_s + |F_s|) / (ν_s τ²_s + Σ (z_f − o_fs)²).
pub fn source_reliability(set: &ClaimSet, stats: &[SourceStats], z: &[f64]) -> Vec<f64> {
    stats
        .iter()
        .enumerate()
        .map(|(s, st)| {
            let n = set.by_source[s].len() as f64;
            (st.nu + n) / (st.nu * st.tau2 + squared_deviation(set, s, z))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::Value;

    fn claim(v: &str, s: &str, o: f64) -> Claim {
        Claim {
            fact: FactKey::new("e", "p", Value::literal(v)),
            source: s.into(),
            observation: o,
        }
    }

    #[test]
    fn majority_mean() {
        let set = ClaimSet::new(&[claim("a", "s1", 1.0), claim("a", "s2", 1.0), claim("a", "s3", 0.0)]).unwrap();
        assert!((majority_init(&set).unwrap()[0] - 2.0 / 3.0).abs() < 1e-12);
        let set = ClaimSet::new(&[claim("a", "s1", 0.8)]).unwrap();
        assert!((majority_init(&set).unwrap()[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn claimless_fact_has_no_majority() {
        let extra = FactKey::new("e", "p", Value::literal("b"));
        let set = ClaimSet::with_facts(&[claim("a", "s1", 0.8)], [extra]).unwrap();
        assert!(matches!(majority_init(&set), Err(Error::NoClaims(_))));
    }

    #[test]
    fn duplicate_claims_merge_by_max() {
        let set = ClaimSet::new(&[claim("a", "s1", 0.4), claim("a", "s1", 0.9)]).unwrap();
        assert_eq!(set.claims.len(), 1);
        assert_eq!(set.claims[0].observation, 0.9);
    }

    #[test]
    fn plain_sample_variance() {
        let set = ClaimSet::new(&[claim("a", "s", 0.9), claim("b", "s", 0.7)]).unwrap();
        let v = sample_variance(&set, 0, &[1.0, 1.0]);
        assert!((v - 0.05).abs() < 1e-12);
        let cfg = TruthConfig {
            use_ci_estimator: false,
            ..Default::default()
        };
        let st = set_hyperparameters(&set, &[1.0, 1.0], &[false, false], &cfg).unwrap();
        assert_eq!(st[0].nu, 2.0);
        assert!((st[0].tau2 - 0.05).abs() < 1e-12);
    }

    #[test]
    fn zero_deviation_is_floored() {
        let set = ClaimSet::new(&[claim("a", "s", 0.5)]).unwrap();
        for ci in [false, true] {
            let cfg = TruthConfig {
                use_ci_estimator: ci,
                ..Default::default()
            };
            let st = set_hyperparameters(&set, &[0.5], &[false], &cfg).unwrap();
            assert_eq!(st[0].tau2, TAU2_FLOOR);
        }
    }

    #[test]
    fn prior_truths_count_as_one() {
        let set = ClaimSet::new(&[claim("a", "s", 0.8)]).unwrap();
        let cfg = TruthConfig {
            use_ci_estimator: false,
            ..Default::default()
        };
        let st = set_hyperparameters(&set, &[0.3], &[true], &cfg).unwrap();
        assert!((st[0].tau2 - 0.04).abs() < 1e-12);
    }

    #[test]
    fn nll_examples() {
        let set = ClaimSet::new(&[claim("a", "s", 1.0)]).unwrap();
        let st = [SourceStats {
            nu: 1.0,
            tau2: 1.0,
            claims: 1,
        }];
        let v = negative_log_likelihood(&[1.0 - DELTA], &set, &st, (1.0, 1.0)).unwrap();
        assert!((v - 0.5f64.ln()).abs() < 1e-9);

        let empty = ClaimSet::with_facts(&[], [FactKey::new("e", "p", Value::literal("a"))]).unwrap();
        let v = negative_log_likelihood(&[0.5], &empty, &[], (5.0, 5.0)).unwrap();
        assert!((v - (-8.0 * 0.5f64.ln())).abs() < 1e-12);
        assert!((v - 5.545).abs() < 1e-3);

        assert!(negative_log_likelihood(&[1.0], &set, &st, (1.0, 1.0)).is_err());
    }

    #[test]
    fn reliability_example() {
        let set = ClaimSet::new(&[claim("a", "s", 1.0), claim("b", "s", 0.0)]).unwrap();
        let st = [SourceStats {
            nu: 2.0,
            tau2: 0.1,
            claims: 2,
        }];
        let r = source_reliability(&set, &st, &[1.0, 0.0]);
        assert!((r[0] - 20.0).abs() < 1e-12);
    }
}
