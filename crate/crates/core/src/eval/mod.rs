//! Ranking and fact metrics, the popularity baseline and the end-to-end
//! synthetic evaluation protocol.

mod metrics;
mod protocol;

use std::collections::BTreeMap;

pub use metrics::{average_precision, fact_prf, mean_average_precision, ndcg_at_m, precision_at_m, Prf};
pub use protocol::{
    run_eval, run_synthetic_protocol, ClassReport, EvalConfig, RankingMetrics, Report, REPORT_SCHEMA_VERSION,
};

use crate::error::{Error, Result};
use crate::kb::{KnowledgeBase, TYPE_PROPERTY};

/// Properties of `class` ordered by how many member entities use them,
/// most used first, ties by property id. Type declarations are skipped.
pub fn popularity_ranking(kb: &KnowledgeBase, class: &str) -> Result<Vec<(String, usize)>> {
    let members = kb.members_of(class);
    if members.is_empty() {
        return Err(Error::InsufficientEntities {
            class: class.to_string(),
            available: 0,
            requested: 1,
        });
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &members {
        for p in kb.properties_of(e).into_iter().flatten() {
            if p != TYPE_PROPERTY {
                *counts.entry(p.as_str()).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().map(|(p, c)| (p.to_string(), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    Ok(ranked)
}

/// The class-global popularity ranking cut to `m`; identical for every
/// entity of the class.
pub fn popularity_baseline(kb: &KnowledgeBase, class: &str, entity: &str, m: usize) -> Result<Vec<String>> {
    kb.require_entity(entity)?;
    Ok(popularity_ranking(kb, class)?
        .into_iter()
        .take(m)
        .map(|(p, _)| p)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{Fact, Value};

    #[test]
    fn most_used_first_and_entity_independent() {
        let mut facts = Vec::new();
        for e in 0..4 {
            let id = format!("e{e}");
            facts.push(Fact::new(&id, TYPE_PROPERTY, Value::class("C")));
            facts.push(Fact::new(&id, "common", Value::literal("x")));
            if e < 2 {
                facts.push(Fact::new(&id, "half", Value::literal("y")));
            }
        }
        facts.push(Fact::new("e0", "rare", Value::literal("z")));
        let kb = KnowledgeBase::from_facts(facts);
        let a = popularity_baseline(&kb, "C", "e0", 10).unwrap();
        let b = popularity_baseline(&kb, "C", "e3", 10).unwrap();
        assert_eq!(a, vec!["common", "half", "rare"]);
        assert_eq!(a, b);
        assert!(popularity_baseline(&kb, "Missing", "e0", 3).is_err());
    }
}
