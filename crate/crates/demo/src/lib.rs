//! WebAssembly bindings for the browser demo. Every entry point takes a
//! JSON options object and returns a JSON result, so the page needs no
//! generated glue beyond strings.

use std::collections::{BTreeMap, BTreeSet};

use kbenrich_core::eval::{average_precision, fact_prf, popularity_ranking, Prf};
use kbenrich_core::gnn::{train, GnnConfig};
use kbenrich_core::graph::{build_graph, GraphOptions};
use kbenrich_core::kb::synthetic::{class_id, generate_kb, SyntheticKbConfig};
use kbenrich_core::kb::{leave_n_out, FactKey, TYPE_PROPERTY};
use kbenrich_core::rng::derive_seed;
use kbenrich_core::source_sim::{generate_world, SourceConfig, WorldConfig};
use kbenrich_core::truth::{chi2_quantile, majority_labels, verify, TruthConfig};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;

fn parse<T: for<'de> Deserialize<'de> + Default>(json: &str) -> Result<T, String> {
    if json.trim().is_empty() {
        return Ok(T::default());
    }
    serde_json::from_str(json).map_err(|e| format!("bad options: {e}"))
}

fn emit<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Debug, Deserialize)]
#[serde(default)]
pub struct WorldOptions {
    pub n_facts: usize,
    pub n_sources: usize,
    pub powerlaw_exponent: f64,
    pub variance_min: f64,
    pub variance_max: f64,
    pub use_ci_estimator: bool,
    pub seed: u64,
}

impl Default for WorldOptions {
    fn default() -> Self {
        WorldOptions {
            n_facts: 200,
            n_sources: 50,
            powerlaw_exponent: 2.0,
            variance_min: 0.01,
            variance_max: 0.25,
            use_ci_estimator: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SourcePoint {
    pub id: String,
    pub claims: usize,
    pub true_variance: f64,
    pub estimated_variance: f64,
    pub reliability: f64,
}

#[derive(Debug, Serialize)]
pub struct WorldResult {
    pub verifier: Prf,
    pub majority: Prf,
    pub converged: bool,
    pub iterations: usize,
    pub sources: Vec<SourcePoint>,
    /// (z, planted truth) per non-prior fact.
    pub facts: Vec<(f64, bool)>,
}

/// Simulates a world, verifies its claims and compares against majority
/// voting. Prior facts are excluded from the scores.
#[wasm_bindgen]
pub fn verify_world(options: &str) -> Result<String, String> {
    let o: WorldOptions = parse(options)?;
    let cfg = WorldConfig {
        n_facts: o.n_facts,
        sources: SourceConfig {
            n_sources: o.n_sources,
            powerlaw_exponent: o.powerlaw_exponent,
            variance_range: (o.variance_min, o.variance_max),
            seed: o.seed,
        },
        ..WorldConfig::default()
    };
    let world = generate_world(&cfg).map_err(|e| e.to_string())?;
    let tcfg = TruthConfig {
        use_ci_estimator: o.use_ci_estimator,
        ..TruthConfig::default()
    };
    let out = verify(&world.claims, &world.prior_truths, &BTreeMap::new(), &tcfg).map_err(|e| e.to_string())?;
    let strip = |s: BTreeSet<FactKey>| -> BTreeSet<FactKey> { s.difference(&world.prior_truths).cloned().collect() };
    let gold = strip(world.true_facts());
    let majority = majority_labels(&world.claims, tcfg.epsilon).map_err(|e| e.to_string())?;
    let by_id: BTreeMap<&str, _> = out.sources.iter().map(|s| (s.source.as_str(), s)).collect();
    let sources = world
        .sources
        .iter()
        .filter_map(|s| {
            let r = by_id.get(s.id.as_str())?;
            Some(SourcePoint {
                id: s.id.clone(),
                claims: s.claim_count,
                true_variance: s.true_error_variance,
                estimated_variance: r.tau2,
                reliability: r.reliability,
            })
        })
        .collect();
    let facts = out
        .facts
        .iter()
        .filter(|f| !world.prior_truths.contains(&f.fact))
        .map(|f| (f.z, world.truths.get(&f.fact).copied().unwrap_or(false)))
        .collect();
    emit(&WorldResult {
        verifier: fact_prf(&strip(out.true_facts()), &gold),
        majority: fact_prf(&strip(majority), &gold),
        converged: out.converged,
        iterations: out.iterations,
        sources,
        facts,
    })
}

#[derive(Debug, Deserialize)]
#[serde(default)]
pub struct EstimatorOptions {
    pub max_claims: usize,
    pub alpha: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            max_claims: 30,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EstimatorPoint {
    pub claims: usize,
    /// Plain estimate divided by the sum of squared deviations (1/n).
    pub plain: f64,
    /// Confidence-bound estimate divided by the same sum.
    pub bound: f64,
}

/// How much each variance estimator scales the sum of squared deviations
/// for a source with n claims.
#[wasm_bindgen]
pub fn variance_estimators(options: &str) -> Result<String, String> {
    let o: EstimatorOptions = parse(options)?;
    let points = (1..=o.max_claims.max(1))
        .map(|n| {
            let q = chi2_quantile(o.alpha / 2.0, n as f64).map_err(|e| e.to_string())?;
            Ok(EstimatorPoint {
                claims: n,
                plain: 1.0 / n as f64,
                bound: 1.0 / q,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    emit(&points)
}

#[derive(Debug, Deserialize)]
#[serde(default)]
pub struct RankingOptions {
    pub seed: u64,
    pub epochs: usize,
    pub attention: bool,
    /// Properties the probed entity keeps.
    pub keep: usize,
}

impl Default for RankingOptions {
    fn default() -> Self {
        RankingOptions {
            seed: 0,
            epochs: 30,
            attention: true,
            keep: 5,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RankedProperty {
    pub property: String,
    pub score: f64,
    pub hidden: bool,
}

#[derive(Debug, Serialize)]
pub struct RankingResult {
    pub entity: String,
    pub kept: Vec<String>,
    pub model: Vec<RankedProperty>,
    pub popularity: Vec<RankedProperty>,
    pub model_ap: f64,
    pub popularity_ap: f64,
    pub losses: Vec<f64>,
}

/// Trains a small model on a toy KB with part of one entity hidden and
/// ranks that entity's missing properties with the model and by class
/// popularity.
#[wasm_bindgen]
pub fn toy_ranking(options: &str) -> Result<String, String> {
    let o: RankingOptions = parse(options)?;
    let err = |e: kbenrich_core::Error| e.to_string();
    let kb = generate_kb(&SyntheticKbConfig {
        classes: 2,
        entities_per_class: 25,
        properties_per_class: 16,
        signature_properties: 6,
        seed: derive_seed(o.seed, "demo/kb"),
        ..SyntheticKbConfig::default()
    });
    let class = class_id(0);
    let entity = kb.members_of(&class)[0].clone();
    let lo = leave_n_out(&kb, &entity, o.keep, derive_seed(o.seed, "demo/holdout")).map_err(err)?;
    let overrides = [(entity.clone(), lo.kept_facts.clone())].into_iter().collect();
    let train_kb = kb.restrict(kb.entities(), &overrides);
    let graph = build_graph(&train_kb, &GraphOptions::default()).map_err(err)?;
    let model = train(
        &graph,
        &GnnConfig {
            epochs: o.epochs,
            batch_size: 128,
            attention_enabled: o.attention,
            seed: derive_seed(o.seed, "demo/gnn"),
            ..GnnConfig::default()
        },
    )
    .map_err(err)?;
    let popular = popularity_ranking(&train_kb, &class).map_err(err)?;
    let universe: BTreeSet<&str> = popular.iter().map(|(p, _)| p.as_str()).collect();
    let mark = |p: String, score: f64| RankedProperty {
        hidden: lo.removed_properties.contains(&p),
        property: p,
        score,
    };
    let ranked: Vec<RankedProperty> = model
        .rank_properties(&graph, &entity, graph.n_properties())
        .map_err(err)?
        .into_iter()
        .filter(|(p, _)| universe.contains(p.as_str()))
        .map(|(p, s)| mark(p, s))
        .collect();
    let members = kb.members_of(&class).len() as f64;
    let popularity: Vec<RankedProperty> = popular
        .into_iter()
        .filter(|(p, _)| !lo.kept_properties.contains(p) && p != TYPE_PROPERTY)
        .map(|(p, c)| mark(p, c as f64 / members))
        .collect();
    let ap = |r: &[RankedProperty]| {
        let names: Vec<&str> = r.iter().map(|x| x.property.as_str()).collect();
        let rel: BTreeSet<&str> = lo.removed_properties.iter().map(String::as_str).collect();
        average_precision(&names, &rel)
    };
    emit(&RankingResult {
        model_ap: ap(&ranked),
        popularity_ap: ap(&popularity),
        entity,
        kept: lo.kept_properties.iter().cloned().collect(),
        model: ranked,
        popularity,
        losses: model.epoch_losses,
    })
}
