use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kb::{FactKey, KnowledgeBase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cardinality {
    Single,
    Multi,
}

/// Multi-valued when at least `multi_share` of the popular entities using
/// `property` hold two or more values for it. Defaults to multi when no
/// popular entity uses the property.
pub fn predict_cardinality<'a>(
    kb: &KnowledgeBase,
    property: &str,
    popular: impl IntoIterator<Item = &'a str>,
    multi_share: f64,
) -> Cardinality {
    let mut users = 0usize;
    let mut multi = 0usize;
    for e in popular {
        let n = kb.facts_of(e).filter(|f| f.property == property).count();
        if n > 0 {
            users += 1;
            if n >= 2 {
                multi += 1;
            }
        }
    }
    if users == 0 || multi as f64 >= multi_share * users as f64 {
        Cardinality::Multi
    } else {
        Cardinality::Single
    }
}

/// Cardinality of every property in the KB, judged from the non-long-tail entities.
pub fn predict_cardinalities(kb: &KnowledgeBase, multi_share: f64) -> BTreeMap<String, Cardinality> {
    let popular: Vec<&str> = kb
        .entities()
        .iter()
        .filter(|e| !kb.is_long_tail(e))
        .map(String::as_str)
        .collect();
    kb.properties()
        .iter()
        .map(|p| {
            (
                p.clone(),
                predict_cardinality(kb, p, popular.iter().copied(), multi_share),
            )
        })
        .collect()
}

/// Labels facts by threshold, except in single-valued (entity, property)
/// groups where only the highest-z fact can be true, and only if it clears
/// the threshold. Ties go to the lexicographically smallest value.
pub fn label_facts(
    facts: &[FactKey],
    z: &[f64],
    cardinality: impl Fn(&str, &str) -> Cardinality,
    epsilon: f64,
) -> Vec<bool> {
    let mut labels: Vec<bool> = z.iter().map(|&z| z >= epsilon).collect();
    let mut groups: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, f) in facts.iter().enumerate() {
        groups
            .entry((f.subject.as_str(), f.property.as_str()))
            .or_default()
            .push(i);
    }
    for ((e, p), idx) in groups {
        if cardinality(e, p) == Cardinality::Multi {
            continue;
        }
        let best = idx
            .iter()
            .copied()
            .reduce(|a, b| {
                let better = z[b] > z[a] || (z[b] == z[a] && facts[b].object < facts[a].object);
                if better {
                    b
                } else {
                    a
                }
            })
            .expect("non-empty group");
        for i in idx {
            labels[i] = i == best && z[i] >= epsilon;
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{Fact, Value};

    fn keys(vals: &[&str]) -> Vec<FactKey> {
        vals.iter().map(|v| FactKey::new("e", "p", Value::literal(*v))).collect()
    }

    #[test]
    fn multi_group_thresholds() {
        let l = label_facts(&keys(&["a", "b"]), &[0.6, 0.4], |_, _| Cardinality::Multi, 0.5);
        assert_eq!(l, vec![true, false]);
    }

    #[test]
    fn single_group_argmax() {
        let l = label_facts(&keys(&["a", "b"]), &[0.6, 0.7], |_, _| Cardinality::Single, 0.5);
        assert_eq!(l, vec![false, true]);
        let l = label_facts(&keys(&["a", "b"]), &[0.3, 0.2], |_, _| Cardinality::Single, 0.5);
        assert_eq!(l, vec![false, false]);
        let l = label_facts(&keys(&["b", "a"]), &[0.7, 0.7], |_, _| Cardinality::Single, 0.5);
        assert_eq!(l, vec![false, true]);
    }

    fn kb_with_counts(counts: &[usize]) -> KnowledgeBase {
        let mut facts = Vec::new();
        for (i, &n) in counts.iter().enumerate() {
            for v in 0..n {
                facts.push(Fact::new(format!("e{i:02}"), "p", Value::literal(format!("v{v}"))));
            }
        }
        KnowledgeBase::from_facts(facts)
    }

    #[test]
    fn cardinality_rule() {
        let kb = kb_with_counts(&[1; 10]);
        assert_eq!(predict_cardinality(&kb, "p", kb.entities().iter().map(String::as_str), 0.1), Cardinality::Single);
        let kb = kb_with_counts(&[3; 10]);
        assert_eq!(predict_cardinality(&kb, "p", kb.entities().iter().map(String::as_str), 0.1), Cardinality::Multi);
        let mut c = vec![1; 20];
        c[0] = 2;
        let kb = kb_with_counts(&c);
        assert_eq!(predict_cardinality(&kb, "p", kb.entities().iter().map(String::as_str), 0.1), Cardinality::Single);
        assert_eq!(predict_cardinality(&kb, "q", kb.entities().iter().map(String::as_str), 0.1), Cardinality::Multi);
    }
}
