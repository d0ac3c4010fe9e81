//! Entity-entity similarity: weighted type overlap, property Dice
//! coefficient, information-weighted value overlap, and their convex
//! combination. All three measures score 0 when either side has no
//! features.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;

/// Corpus statistics computed once per KB snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// q_t = |E| / (number of entities with type t)
    pub type_weight: BTreeMap<String, f64>,
    /// info(v) = ln(|E| / number of entities having v)
    pub value_info: BTreeMap<String, f64>,
}

impl CorpusStats {
    pub fn from_kb(kb: &KnowledgeBase) -> Self {
        let n = kb.entities().len() as f64;
        let mut type_counts: BTreeMap<&str, usize> = BTreeMap::new();
        for ts in kb.type_index().values() {
            for t in ts {
                *type_counts.entry(t).or_default() += 1;
            }
        }
        let mut value_counts: BTreeMap<&str, usize> = BTreeMap::new();
        for vs in kb.value_index().values() {
            for v in vs {
                *value_counts.entry(v).or_default() += 1;
            }
        }
        CorpusStats {
            type_weight: type_counts
                .into_iter()
                .map(|(t, c)| (t.to_string(), n / c as f64))
                .collect(),
            value_info: value_counts
                .into_iter()
                .map(|(v, c)| (v.to_string(), (n / c as f64).ln()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        SimilarityWeights {
            alpha1: 0.3,
            alpha2: 0.3,
            alpha3: 0.4,
        }
    }
}

impl SimilarityWeights {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64) -> Result<Self> {
        let w = SimilarityWeights {
            alpha1,
            alpha2,
            alpha3,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha1, self.alpha2, self.alpha3];
        if all.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Config(format!(
                "similarity weights must lie in [0,1], got {all:?}"
            )));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "similarity weights must sum to 1, got {all:?}"
            )));
        }
        Ok(())
    }
}

static EMPTY: BTreeSet<String> = BTreeSet::new();

fn weighted_dice(a: &BTreeSet<String>, b: &BTreeSet<String>, weight: impl Fn(&str) -> f64) -> f64 {
    let denom: f64 = a.iter().map(|x| weight(x)).sum::<f64>() + b.iter().map(|x| weight(x)).sum::<f64>();
    if denom <= 0.0 {
        return 0.0;
    }
    let common: f64 = a.intersection(b).map(|x| weight(x)).sum();
    (2.0 * common / denom).clamp(0.0, 1.0)
}

fn check(kb: &KnowledgeBase, e1: &str, e2: &str) -> Result<()> {
    kb.require_entity(e1)?;
    kb.require_entity(e2)
}

pub fn type_similarity(kb: &KnowledgeBase, stats: &CorpusStats, e1: &str, e2: &str) -> Result<f64> {
    check(kb, e1, e2)?;
    Ok(type_sim_unchecked(kb, stats, e1, e2))
}

pub fn property_similarity(kb: &KnowledgeBase, e1: &str, e2: &str) -> Result<f64> {
    check(kb, e1, e2)?;
    Ok(property_sim_unchecked(kb, e1, e2))
}

pub fn value_similarity(kb: &KnowledgeBase, stats: &CorpusStats, e1: &str, e2: &str) -> Result<f64> {
    check(kb, e1, e2)?;
    Ok(value_sim_unchecked(kb, stats, e1, e2))
}

fn type_sim_unchecked(kb: &KnowledgeBase, stats: &CorpusStats, e1: &str, e2: &str) -> f64 {
    let t1 = kb.types_of(e1).unwrap_or(&EMPTY);
    let t2 = kb.types_of(e2).unwrap_or(&EMPTY);
    if t1.is_empty() || t2.is_empty() {
        return 0.0;
    }
    weighted_dice(t1, t2, |t| stats.type_weight.get(t).copied().unwrap_or(0.0))
}

fn property_sim_unchecked(kb: &KnowledgeBase, e1: &str, e2: &str) -> f64 {
    let p1 = kb.properties_of(e1).unwrap_or(&EMPTY);
    let p2 = kb.properties_of(e2).unwrap_or(&EMPTY);
    weighted_dice(p1, p2, |_| 1.0)
}

fn value_sim_unchecked(kb: &KnowledgeBase, stats: &CorpusStats, e1: &str, e2: &str) -> f64 {
    let v1 = kb.values_of(e1).unwrap_or(&EMPTY);
    let v2 = kb.values_of(e2).unwrap_or(&EMPTY);
    weighted_dice(v1, v2, |v| stats.value_info.get(v).copied().unwrap_or(0.0))
}

pub fn overall_similarity(weights: &SimilarityWeights, s_t: f64, s_p: f64, s_v: f64) -> Result<f64> {
    weights.validate()?;
    Ok(weights.alpha1 * s_t + weights.alpha2 * s_p + weights.alpha3 * s_v)
}

/// Overall similarity of two known entities.
pub fn similarity(
    kb: &KnowledgeBase,
    stats: &CorpusStats,
    weights: &SimilarityWeights,
    e1: &str,
    e2: &str,
) -> Result<f64> {
    check(kb, e1, e2)?;
    overall_similarity(
        weights,
        type_sim_unchecked(kb, stats, e1, e2),
        property_sim_unchecked(kb, e1, e2),
        value_sim_unchecked(kb, stats, e1, e2),
    )
}

/// The `k` entities most similar to `e`, excluding `e`, by descending
/// overall similarity with ties broken by ascending entity id.
pub fn top_k_neighbors(
    kb: &KnowledgeBase,
    stats: &CorpusStats,
    weights: &SimilarityWeights,
    e: &str,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    kb.require_entity(e)?;
    weights.validate()?;
    let mut scored: Vec<(String, f64)> = kb
        .entities()
        .iter()
        .filter(|other| other.as_str() != e)
        .map(|other| {
            let s = weights.alpha1 * type_sim_unchecked(kb, stats, e, other)
                + weights.alpha2 * property_sim_unchecked(kb, e, other)
                + weights.alpha3 * value_sim_unchecked(kb, stats, e, other);
            (other.clone(), s)
        })
        .collect();
    // Entities iterate in id order and the sort is stable, so equal scores
    // stay in ascending id order.
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(k);
    Ok(scored)
}
