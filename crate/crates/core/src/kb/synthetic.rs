//! Seeded generator for class-structured toy KBs.
//!
//! Each class owns a block of properties. Entities of a class fall into
//! latent clusters; a cluster has its own signature properties, a preferred
//! value per property and (usually) a declared subtype. Property usage is
//! therefore correlated within a class and more strongly within a cluster,
//! which is the structure neighbour-based property prediction exploits and
//! a class-global popularity ranking cannot.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Fact, KnowledgeBase, Value, TYPE_PROPERTY};
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticKbConfig {
    pub classes: usize,
    pub entities_per_class: usize,
    pub properties_per_class: usize,
    pub clusters_per_class: usize,
    pub signature_properties: usize,
    pub signature_usage: f64,
    pub background_usage: f64,
    pub min_properties: usize,
    pub values_per_property: usize,
    pub subtype_probability: f64,
    pub seed: u64,
}

impl Default for SyntheticKbConfig {
    fn default() -> Self {
        SyntheticKbConfig {
            classes: 5,
            entities_per_class: 60,
            properties_per_class: 30,
            clusters_per_class: 3,
            signature_properties: 10,
            signature_usage: 0.85,
            background_usage: 0.35,
            min_properties: 8,
            values_per_property: 6,
            subtype_probability: 0.7,
            seed: 0,
        }
    }
}

pub fn class_id(c: usize) -> String {
    format!("C{c}")
}

pub fn generate_kb(cfg: &SyntheticKbConfig) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    for c in 0..cfg.classes {
        let mut rng = rng_for(cfg.seed, &format!("synthetic-kb/class/{c}"));
        let class = class_id(c);
        let props: Vec<String> = (0..cfg.properties_per_class)
            .map(|j| format!("c{c}/p{j:02}"))
            .collect();
        // Class-level popularity decays with the property index.
        let base: Vec<f64> = (0..props.len())
            .map(|j| cfg.background_usage * (1.0 + j as f64).powf(-0.5))
            .collect();
        let signature_count = cfg.signature_properties.min(props.len());
        let signatures: Vec<Vec<bool>> = (0..cfg.clusters_per_class)
            .map(|_| {
                let mut sig = vec![false; props.len()];
                for j in sample(&mut rng, props.len(), signature_count) {
                    sig[j] = true;
                }
                sig
            })
            .collect();
        let preferred: Vec<Vec<usize>> = (0..cfg.clusters_per_class)
            .map(|_| {
                (0..props.len())
                    .map(|_| rng.random_range(0..cfg.values_per_property))
                    .collect()
            })
            .collect();

        for i in 0..cfg.entities_per_class {
            let e = format!("c{c}_e{i:03}");
            let cluster = rng.random_range(0..cfg.clusters_per_class);
            kb.insert(Fact::new(&e, TYPE_PROPERTY, Value::class(&class)));
            if rng.random_bool(cfg.subtype_probability) {
                kb.insert(Fact::new(
                    &e,
                    TYPE_PROPERTY,
                    Value::class(format!("{class}.k{cluster}")),
                ));
            }
            let mut used: Vec<usize> = (0..props.len())
                .filter(|&j| {
                    let p = if signatures[cluster][j] {
                        cfg.signature_usage
                    } else {
                        base[j]
                    };
                    rng.random_bool(p.clamp(0.0, 1.0))
                })
                .collect();
            if used.len() < cfg.min_properties {
                for j in (0..props.len()).filter(|&j| signatures[cluster][j]) {
                    if used.len() >= cfg.min_properties {
                        break;
                    }
                    if !used.contains(&j) {
                        used.push(j);
                    }
                }
            }
            for j in used {
                let n_values = if rng.random_bool(0.3) { 2 } else { 1 };
                for _ in 0..n_values {
                    let v = if rng.random_bool(0.6) {
                        preferred[cluster][j]
                    } else {
                        rng.random_range(0..cfg.values_per_property)
                    };
                    kb.insert(Fact::new(
                        &e,
                        &props[j],
                        Value::literal(format!("{}/v{v}", props[j])),
                    ));
                }
            }
        }
    }
    kb
}
