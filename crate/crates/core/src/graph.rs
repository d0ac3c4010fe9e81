//! Entity-property graph: usage edges between entities and properties, and
//! directed top-k similarity edges between entities. Node indices follow
//! sorted id order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;
use crate::similarity::{top_k_neighbors, CorpusStats, SimilarityWeights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphOptions {
    pub k: usize,
    pub weights: SimilarityWeights,
    /// Add the reverse of every entity-entity edge (ablation only).
    pub symmetrize_ee: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            k: 10,
            weights: SimilarityWeights::default(),
            symmetrize_ee: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityPropertyGraph {
    pub entity_ids: Vec<String>,
    pub property_ids: Vec<String>,
    /// N_i^P: properties used by entity i.
    pub entity_properties: Vec<Vec<usize>>,
    /// M_j^E: entities using property j.
    pub property_entities: Vec<Vec<usize>>,
    /// N_i^E: entity i's own top-k similar entities, most similar first.
    pub entity_neighbors: Vec<Vec<usize>>,
    pub k: usize,
    pub symmetrized: bool,
}

impl EntityPropertyGraph {
    pub fn n_entities(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn n_properties(&self) -> usize {
        self.property_ids.len()
    }

    pub fn entity_index(&self, id: &str) -> Option<usize> {
        self.entity_ids.binary_search_by(|e| e.as_str().cmp(id)).ok()
    }

    pub fn property_index(&self, id: &str) -> Option<usize> {
        self.property_ids.binary_search_by(|p| p.as_str().cmp(id)).ok()
    }

    pub fn ep_edge_count(&self) -> usize {
        self.entity_properties.iter().map(Vec::len).sum()
    }

    pub fn uses(&self, entity: usize, property: usize) -> bool {
        self.entity_properties[entity].binary_search(&property).is_ok()
    }

    /// Checks that both directions of the usage adjacency agree.
    pub fn check_consistency(&self) -> Result<()> {
        for (i, props) in self.entity_properties.iter().enumerate() {
            for &j in props {
                if self.property_entities[j].binary_search(&i).is_err() {
                    return Err(Error::Config(format!(
                        "edge ({}, {}) missing from property side",
                        self.entity_ids[i], self.property_ids[j]
                    )));
                }
            }
        }
        for (j, ents) in self.property_entities.iter().enumerate() {
            for &i in ents {
                if !self.uses(i, j) {
                    return Err(Error::Config(format!(
                        "edge ({}, {}) missing from entity side",
                        self.entity_ids[i], self.property_ids[j]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(s)?;
        g.check_consistency()?;
        Ok(g)
    }
}

pub fn build_graph(kb: &KnowledgeBase, opts: &GraphOptions) -> Result<EntityPropertyGraph> {
    if kb.is_empty() {
        return Err(Error::Config("cannot build a graph from an empty KB".into()));
    }
    if opts.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let entity_ids: Vec<String> = kb.entities().iter().cloned().collect();
    let property_ids: Vec<String> = kb.properties().iter().cloned().collect();
    let e_idx: BTreeMap<&str, usize> = entity_ids
        .iter()
        .enumerate()
        .map(|(i, e)| (e.as_str(), i))
        .collect();
    let p_idx: BTreeMap<&str, usize> = property_ids
        .iter()
        .enumerate()
        .map(|(j, p)| (p.as_str(), j))
        .collect();

    let mut entity_properties = vec![Vec::new(); entity_ids.len()];
    let mut property_entities = vec![Vec::new(); property_ids.len()];
    for (i, e) in entity_ids.iter().enumerate() {
        if let Some(props) = kb.properties_of(e) {
            for p in props {
                let j = p_idx[p.as_str()];
                entity_properties[i].push(j);
                property_entities[j].push(i);
            }
        }
    }
    for v in entity_properties.iter_mut().chain(property_entities.iter_mut()) {
        v.sort_unstable();
    }

    let stats = CorpusStats::from_kb(kb);
    let mut entity_neighbors = Vec::with_capacity(entity_ids.len());
    for e in &entity_ids {
        let list = if entity_ids.len() > 1 {
            top_k_neighbors(kb, &stats, &opts.weights, e, opts.k)?
        } else {
            Vec::new()
        };
        entity_neighbors.push(list.iter().map(|(o, _)| e_idx[o.as_str()]).collect::<Vec<_>>());
    }
    if opts.symmetrize_ee {
        let mut sym = entity_neighbors.clone();
        for (i, ns) in entity_neighbors.iter().enumerate() {
            for &j in ns {
                if !sym[j].contains(&i) {
                    sym[j].push(i);
                }
            }
        }
        entity_neighbors = sym;
    }

    let g = EntityPropertyGraph {
        entity_ids,
        property_ids,
        entity_properties,
        property_entities,
        entity_neighbors,
        k: opts.k,
        symmetrized: opts.symmetrize_ee,
    };
    debug_assert!(g.check_consistency().is_ok());
    Ok(g)
}
