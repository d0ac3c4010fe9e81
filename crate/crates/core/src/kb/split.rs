use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Fact, KnowledgeBase, LONG_TAIL_THRESHOLD, TYPE_PROPERTY};
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Result of hiding all but `n` properties of one entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaveOut {
    pub kept_properties: BTreeSet<String>,
    pub kept_facts: Vec<Fact>,
    pub removed_properties: BTreeSet<String>,
    pub removed_facts: Vec<Fact>,
}

/// Keeps `n` randomly chosen distinct properties of `entity` (all of them if
/// it has at most `n`) and removes the rest. Type declarations are always
/// kept and never counted.
pub fn leave_n_out(kb: &KnowledgeBase, entity: &str, n: usize, seed: u64) -> Result<LeaveOut> {
    kb.require_entity(entity)?;
    let mut props: Vec<String> = kb
        .properties_of(entity)
        .map(|ps| ps.iter().filter(|p| *p != TYPE_PROPERTY).cloned().collect())
        .unwrap_or_default();
    let mut rng = rng_for(seed, &format!("leave-n-out/{entity}"));
    props.shuffle(&mut rng);
    let kept_properties: BTreeSet<String> = props.iter().take(n).cloned().collect();
    let removed_properties: BTreeSet<String> = props.iter().skip(n).cloned().collect();
    let (kept_facts, removed_facts) = kb
        .facts_of(entity)
        .cloned()
        .partition(|f| f.property == TYPE_PROPERTY || kept_properties.contains(&f.property));
    Ok(LeaveOut {
        kept_properties,
        kept_facts,
        removed_properties,
        removed_facts,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub class: String,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    /// Held-out properties and facts per test entity.
    pub removed: BTreeMap<String, LeaveOut>,
}

impl DatasetSplit {
    /// Training KB: train and validation entities with all their facts, test
    /// entities with only the kept facts.
    pub fn training_kb(&self, kb: &KnowledgeBase) -> KnowledgeBase {
        let keep: BTreeSet<String> = self
            .train
            .iter()
            .chain(&self.validation)
            .chain(&self.test)
            .cloned()
            .collect();
        let overrides: BTreeMap<String, Vec<Fact>> = self
            .removed
            .iter()
            .map(|(e, lo)| (e.clone(), lo.kept_facts.clone()))
            .collect();
        kb.restrict(&keep, &overrides)
    }
}

/// Samples disjoint train/validation/test entity lists from the members of
/// `class` without replacement, then applies leave-n-out (n =
/// [`LONG_TAIL_THRESHOLD`]) to every test entity.
pub fn sample_synthetic_split(
    kb: &KnowledgeBase,
    class: &str,
    n_train: usize,
    n_val: usize,
    n_test: usize,
    seed: u64,
) -> Result<DatasetSplit> {
    let mut members = kb.members_of(class);
    let requested = n_train + n_val + n_test;
    if members.len() < requested {
        return Err(Error::InsufficientEntities {
            class: class.to_string(),
            available: members.len(),
            requested,
        });
    }
    let mut rng = rng_for(seed, &format!("split/{class}"));
    members.shuffle(&mut rng);
    let train = members[..n_train].to_vec();
    let validation = members[n_train..n_train + n_val].to_vec();
    let test = members[n_train + n_val..requested].to_vec();
    let mut removed = BTreeMap::new();
    for e in &test {
        removed.insert(e.clone(), leave_n_out(kb, e, LONG_TAIL_THRESHOLD, seed)?);
    }
    Ok(DatasetSplit {
        class: class.to_string(),
        train,
        validation,
        test,
        removed,
    })
}
