use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::metrics::{average_precision, fact_prf, ndcg_at_m, precision_at_m, Prf};
use super::popularity_ranking;
use crate::error::{Error, Result};
use crate::gnn::{train, GnnConfig};
use crate::graph::{build_graph, GraphOptions};
use crate::kb::synthetic::{class_id, generate_kb, SyntheticKbConfig};
use crate::kb::{
    load_kb, sample_synthetic_split, DatasetSplit, Fact, FactKey, KbFormat, KnowledgeBase, Value, ValueKind, TYPE_PROPERTY,
};
use crate::rng::{derive_seed, rng_for};
use crate::source_sim::{simulate_claims, PlantedFact, SourceConfig};
use crate::truth::{majority_labels, predict_cardinalities, verify, Cardinality, TruthConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Master seed; every component seed is derived from it.
    pub seed: u64,
    /// KB file to evaluate on; a synthetic KB is generated when absent.
    pub kb_path: Option<PathBuf>,
    pub synthetic: SyntheticKbConfig,
    /// Classes to evaluate; empty means every class of the synthetic KB.
    pub classes: Vec<String>,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub graph: GraphOptions,
    pub gnn: GnnConfig,
    /// Also train and report a copy of the model with uniform coefficients.
    pub ablate_attention: bool,
    pub sources: SourceConfig,
    pub truth: TruthConfig,
    /// False candidate values generated per held-out fact.
    pub distractors_per_fact: usize,
    /// Known facts of training entities passed to verification as prior truths.
    pub prior_facts: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seed: 0,
            kb_path: None,
            synthetic: SyntheticKbConfig::default(),
            classes: Vec::new(),
            train: 40,
            validation: 10,
            test: 10,
            graph: GraphOptions::default(),
            gnn: GnnConfig::default(),
            ablate_attention: false,
            sources: SourceConfig::default(),
            truth: TruthConfig::default(),
            distractors_per_fact: 1,
            prior_facts: 10,
        }
    }
}

impl EvalConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: EvalConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.test == 0 {
            return Err(Error::Config("test must be at least 1".into()));
        }
        self.graph.weights.validate()?;
        self.gnn.validate()?;
        self.sources.validate()?;
        self.truth.validate()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    #[serde(rename = "p@5")]
    pub precision_at_5: f64,
    #[serde(rename = "p@10")]
    pub precision_at_10: f64,
    #[serde(rename = "ndcg@5")]
    pub ndcg_at_5: f64,
    #[serde(rename = "ndcg@10")]
    pub ndcg_at_10: f64,
    pub map: f64,
}

impl RankingMetrics {
    fn of(rankings: &[(Vec<String>, BTreeSet<String>)]) -> Self {
        let n = rankings.len().max(1) as f64;
        let mut m = RankingMetrics::default();
        for (r, rel) in rankings {
            m.precision_at_5 += precision_at_m(r, rel, 5) / n;
            m.precision_at_10 += precision_at_m(r, rel, 10) / n;
            m.ndcg_at_5 += ndcg_at_m(r, rel, 5) / n;
            m.ndcg_at_10 += ndcg_at_m(r, rel, 10) / n;
            m.map += average_precision(r, rel) / n;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    pub test_entities: usize,
    pub held_out_facts: usize,
    pub candidate_facts: usize,
    /// Ranking metrics per method (`gnn`, `popularity`, optionally `gnn-uniform`).
    pub ranking: BTreeMap<String, RankingMetrics>,
    /// Fact verification per method (`verifier`, `majority`).
    pub verification: BTreeMap<String, Prf>,
    pub inference_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub seed: u64,
    pub config: EvalConfig,
    pub classes: Vec<ClassReport>,
    /// Unweighted mean over the class rows.
    pub average: ClassReport,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Loads or generates the KB named by the config and runs the protocol.
pub fn run_eval(cfg: &EvalConfig) -> Result<Report> {
    let (kb, default_classes) = match &cfg.kb_path {
        Some(path) => (load_kb(path, KbFormat::from_path(path))?, Vec::new()),
        None => {
            let syn = SyntheticKbConfig {
                seed: derive_seed(cfg.seed, "eval/kb"),
                ..cfg.synthetic.clone()
            };
            (generate_kb(&syn), (0..syn.classes).map(class_id).collect())
        }
    };
    let classes = if cfg.classes.is_empty() {
        default_classes
    } else {
        cfg.classes.clone()
    };
    if classes.is_empty() {
        return Err(Error::Config("no classes to evaluate".into()));
    }
    run_synthetic_protocol(&kb, &classes, cfg)
}

/// Samples a split per class and hides all but five properties of every
/// test entity at once, trains one model on everything that remains, then
/// per class ranks the hidden properties with the model and the popularity
/// baseline (both restricted to properties the class uses in training), simulates claims about the hidden facts plus false
/// distractors, and verifies them.
pub fn run_synthetic_protocol(kb: &KnowledgeBase, classes: &[String], cfg: &EvalConfig) -> Result<Report> {
    cfg.validate()?;
    let mut splits = Vec::with_capacity(classes.len());
    for class in classes {
        let seed = derive_seed(cfg.seed, &format!("eval/split/{class}"));
        splits.push(sample_synthetic_split(kb, class, cfg.train, cfg.validation, cfg.test, seed)?);
    }
    let mut overrides: BTreeMap<String, Vec<Fact>> = BTreeMap::new();
    for split in &splits {
        for (e, lo) in &split.removed {
            if overrides.insert(e.clone(), lo.kept_facts.clone()).is_some() {
                return Err(Error::Config(format!("entity {e} is a test entity of two classes")));
            }
        }
    }
    let tkb = kb.restrict(kb.entities(), &overrides);
    let graph = build_graph(&tkb, &cfg.graph)?;

    let mut models = vec![("gnn", true)];
    if cfg.ablate_attention {
        models.push(("gnn-uniform", false));
    }
    let mut trained = Vec::with_capacity(models.len());
    for (name, attention) in models {
        let gcfg = GnnConfig {
            seed: derive_seed(cfg.seed, "eval/gnn"),
            attention_enabled: attention,
            ..cfg.gnn.clone()
        };
        trained.push((name, train(&graph, &gcfg)?));
        log::info!("trained {name}");
    }
    let cardinality = predict_cardinalities(&tkb, cfg.truth.multi_value_share);

    let mut rows = Vec::with_capacity(classes.len());
    for split in &splits {
        let class = split.class.as_str();
        let popular = popularity_ranking(&tkb, class)?;
        let universe: BTreeSet<&str> = popular.iter().map(|(p, _)| p.as_str()).collect();
        let mut ranking = BTreeMap::new();
        for (name, model) in &trained {
            let mut results = Vec::with_capacity(split.test.len());
            for e in &split.test {
                let ranked: Vec<String> = model
                    .rank_properties(&graph, e, graph.n_properties())?
                    .into_iter()
                    .map(|(p, _)| p)
                    .filter(|p| universe.contains(p.as_str()))
                    .collect();
                results.push((ranked, split.removed[e].removed_properties.clone()));
            }
            ranking.insert(name.to_string(), RankingMetrics::of(&results));
        }
        let results: Vec<(Vec<String>, BTreeSet<String>)> = split
            .test
            .iter()
            .map(|e| {
                let lo = &split.removed[e];
                let ranked = popular
                    .iter()
                    .map(|(p, _)| p.clone())
                    .filter(|p| !lo.kept_properties.contains(p))
                    .collect();
                (ranked, lo.removed_properties.clone())
            })
            .collect();
        ranking.insert("popularity".to_string(), RankingMetrics::of(&results));
        let (verification, stats) = verify_class(&tkb, split, &cardinality, cfg)?;
        rows.push(ClassReport {
            class: class.to_string(),
            test_entities: split.test.len(),
            held_out_facts: stats.0,
            candidate_facts: stats.1,
            ranking,
            verification,
            inference_converged: stats.2,
        });
        log::info!("evaluated class {class}");
    }
    let average = average_row(&rows);
    Ok(Report {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: cfg.seed,
        config: cfg.clone(),
        classes: rows,
        average,
    })
}

/// Verification metrics for one class, plus (held-out facts, candidate
/// facts, converged).
fn verify_class(
    tkb: &KnowledgeBase,
    split: &DatasetSplit,
    cardinality: &BTreeMap<String, Cardinality>,
    cfg: &EvalConfig,
) -> Result<(BTreeMap<String, Prf>, (usize, usize, bool))> {
    let class = &split.class;
    let mut rng = rng_for(cfg.seed, &format!("eval/candidates/{class}"));
    let mut planted: Vec<PlantedFact> = Vec::new();
    let mut gold: BTreeSet<FactKey> = BTreeSet::new();
    for e in &split.test {
        let lo = &split.removed[e];
        let true_values: BTreeSet<FactKey> = lo.removed_facts.iter().map(|f| f.key()).collect();
        for key in &true_values {
            gold.insert(key.clone());
            planted.push(PlantedFact {
                fact: key.clone(),
                truth: true,
                prior: false,
            });
        }
        for p in &lo.removed_properties {
            let taken: BTreeSet<&Value> = true_values
                .iter()
                .filter(|k| &k.property == p)
                .map(|k| &k.object)
                .collect();
            let pool: Vec<Value> = tkb
                .facts()
                .iter()
                .filter(|f| &f.property == p && !taken.contains(&f.object))
                .map(|f| f.object.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let wanted = cfg.distractors_per_fact * taken.len();
            let mut picks: Vec<Value> = sample(&mut rng, pool.len(), wanted.min(pool.len()))
                .into_iter()
                .map(|i| pool[i].clone())
                .collect();
            for k in picks.len()..wanted {
                picks.push(Value::new(ValueKind::Literal, format!("{p}/unseen{k}")));
            }
            for v in picks {
                planted.push(PlantedFact {
                    fact: FactKey::new(e, p, v),
                    truth: false,
                    prior: false,
                });
            }
        }
    }
    let candidates = planted.len();
    let mut verification = BTreeMap::new();
    if planted.is_empty() {
        return Ok((verification, (gold.len(), 0, true)));
    }
    let known: Vec<FactKey> = split
        .train
        .iter()
        .flat_map(|e| tkb.facts_of(e))
        .filter(|f| f.property != TYPE_PROPERTY)
        .map(|f| f.key())
        .collect();
    let prior: BTreeSet<FactKey> = sample(&mut rng, known.len(), cfg.prior_facts.min(known.len()))
        .into_iter()
        .map(|i| known[i].clone())
        .collect();
    planted.extend(prior.iter().map(|k| PlantedFact {
        fact: k.clone(),
        truth: true,
        prior: true,
    }));
    let src = SourceConfig {
        seed: derive_seed(cfg.seed, &format!("eval/sources/{class}")),
        ..cfg.sources.clone()
    };
    let world = simulate_claims(&planted, &src)?;
    let out = verify(&world.claims, &world.prior_truths, cardinality, &cfg.truth)?;
    let strip = |s: BTreeSet<FactKey>| -> BTreeSet<FactKey> { s.difference(&prior).cloned().collect() };
    verification.insert("verifier".to_string(), fact_prf(&strip(out.true_facts()), &gold));
    let majority = majority_labels(&world.claims, cfg.truth.epsilon)?;
    verification.insert("majority".to_string(), fact_prf(&strip(majority), &gold));
    Ok((verification, (gold.len(), candidates, out.converged)))
}

fn average_row(rows: &[ClassReport]) -> ClassReport {
    let n = rows.len().max(1) as f64;
    let mut ranking: BTreeMap<String, RankingMetrics> = BTreeMap::new();
    let mut verification: BTreeMap<String, Prf> = BTreeMap::new();
    for r in rows {
        for (k, m) in &r.ranking {
            let a = ranking.entry(k.clone()).or_default();
            a.precision_at_5 += m.precision_at_5 / n;
            a.precision_at_10 += m.precision_at_10 / n;
            a.ndcg_at_5 += m.ndcg_at_5 / n;
            a.ndcg_at_10 += m.ndcg_at_10 / n;
            a.map += m.map / n;
        }
        for (k, p) in &r.verification {
            let a = verification.entry(k.clone()).or_insert(Prf {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
            });
            a.precision += p.precision / n;
            a.recall += p.recall / n;
            a.f1 += p.f1 / n;
        }
    }
    ClassReport {
        class: "average".to_string(),
        test_entities: rows.iter().map(|r| r.test_entities).sum(),
        held_out_facts: rows.iter().map(|r| r.held_out_facts).sum(),
        candidate_facts: rows.iter().map(|r| r.candidate_facts).sum(),
        ranking,
        verification,
        inference_converged: rows.iter().all(|r| r.inference_converged),
    }
}
