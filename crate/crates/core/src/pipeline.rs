//! End-to-end enrichment of one entity: predict missing properties, gather
//! claims about them from extractors, verify the claims and write the
//! accepted facts back into the KB with an audit trail.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{GnnConfig, TrainedModel};
use crate::graph::{EntityPropertyGraph, GraphOptions};
use crate::kb::{Fact, FactKey, KnowledgeBase, Value, ValueKind, TYPE_PROPERTY};
use crate::source_sim::{merge_claims, Claim, Extractor, WorldConfig};
use crate::truth::{predict_cardinalities, verify, SourceReport, TruthConfig, VerifiedFact};

/// File locations used by the pipeline. Relative paths are resolved
/// against the directory of the config file by [`PipelineConfig::load`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelinePaths {
    pub kb: Option<PathBuf>,
    /// JSONL claims served to the extractors.
    pub claims: Option<PathBuf>,
    /// JSONL facts known to be true, in addition to facts already in the KB.
    pub prior: Option<PathBuf>,
    /// Prebuilt graph JSON; rebuilt from the KB when absent.
    pub graph: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Output directory for enrichment results, the updated KB and the audit log.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Properties to predict per entity.
    pub m: usize,
    pub paths: PipelinePaths,
    /// Declared range class per relation property, used to type entities
    /// created on write-back.
    pub ranges: BTreeMap<String, String>,
    pub graph: GraphOptions,
    pub gnn: GnnConfig,
    pub truth: TruthConfig,
    pub world: WorldConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            m: 10,
            paths: PipelinePaths::default(),
            ranges: BTreeMap::new(),
            graph: GraphOptions::default(),
            gnn: GnnConfig::default(),
            truth: TruthConfig::default(),
            world: WorldConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a TOML config file and resolves its relative paths against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for slot in [
            &mut p.kb,
            &mut p.claims,
            &mut p.prior,
            &mut p.graph,
            &mut p.checkpoint,
            &mut p.output,
        ] {
            if let Some(rel) = slot.as_ref().filter(|r| r.is_relative()) {
                *slot = Some(base.join(rel));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        self.graph.weights.validate()?;
        self.gnn.validate()?;
        self.world.sources.validate()?;
        self.truth.validate()
    }

    /// Checks that every configured path is resolvable: its parent
    /// directory exists. Missing input files surface when they are read.
    pub fn check_paths(&self) -> Result<()> {
        let p = &self.paths;
        for (name, path) in [
            ("kb", &p.kb),
            ("claims", &p.claims),
            ("prior", &p.prior),
            ("graph", &p.graph),
            ("checkpoint", &p.checkpoint),
            ("output", &p.output),
        ] {
            let Some(path) = path else { continue };
            let parent = path.parent().filter(|d| !d.as_os_str().is_empty());
            if parent.is_some_and(|d| !d.is_dir()) {
                return Err(Error::Config(format!(
                    "paths.{name}: directory of {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

/// What happened to one predicted property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyDiagnostic {
    pub property: String,
    /// Model score of the property for the entity.
    pub score: f64,
    pub claims: usize,
    pub candidate_facts: usize,
    pub accepted_facts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentResult {
    pub entity: String,
    pub properties: Vec<PropertyDiagnostic>,
    /// Every candidate fact with its truth estimate, label and sources.
    pub facts: Vec<VerifiedFact>,
    pub sources: Vec<SourceReport>,
    pub converged: bool,
}

impl EnrichmentResult {
    fn empty(entity: &str, properties: Vec<PropertyDiagnostic>) -> Self {
        EnrichmentResult {
            entity: entity.to_string(),
            properties,
            facts: Vec::new(),
            sources: Vec::new(),
            converged: true,
        }
    }

    pub fn accepted(&self) -> impl Iterator<Item = &VerifiedFact> {
        self.facts.iter().filter(|f| f.label)
    }
}

/// Properties used by members of any class of `entity`; `None` when the
/// entity is untyped.
pub fn class_properties(kb: &KnowledgeBase, entity: &str) -> Option<BTreeSet<String>> {
    let classes = kb.types_of(entity)?;
    Some(
        classes
            .iter()
            .flat_map(|c| kb.members_of(c))
            .flat_map(|e| kb.properties_of(&e).cloned().unwrap_or_default())
            .filter(|p| p != TYPE_PROPERTY)
            .collect(),
    )
}

/// Ranks the top `m` missing properties of `entity` (among those its
/// classes use, when it has any), collects claims about them from every
/// extractor and verifies them. Facts already in the KB
/// and `prior` serve as prior truths. No claims at all yields an empty
/// result rather than an error.
#[allow(clippy::too_many_arguments)]
pub fn enrich(
    kb: &KnowledgeBase,
    graph: &EntityPropertyGraph,
    model: &TrainedModel,
    extractors: &[&dyn Extractor],
    prior: &BTreeSet<FactKey>,
    entity: &str,
    m: usize,
    truth: &TruthConfig,
) -> Result<EnrichmentResult> {
    let universe = class_properties(kb, entity);
    let ranked: Vec<(String, f64)> = model
        .rank_properties(graph, entity, graph.n_properties())?
        .into_iter()
        .filter(|(p, _)| p != TYPE_PROPERTY && universe.as_ref().is_none_or(|u| u.contains(p)))
        .take(m)
        .collect();
    let mut per_property: Vec<Vec<Claim>> = Vec::with_capacity(ranked.len());
    for (p, _) in &ranked {
        let lists: Vec<Vec<Claim>> = extractors
            .iter()
            .map(|x| {
                x.extract(entity, p)
                    .into_iter()
                    .filter(|c| c.fact.subject == entity && &c.fact.property == p)
                    .collect()
            })
            .collect();
        per_property.push(merge_claims(lists));
    }
    let mut diagnostics: Vec<PropertyDiagnostic> = ranked
        .iter()
        .zip(&per_property)
        .map(|((p, score), cs)| PropertyDiagnostic {
            property: p.clone(),
            score: *score,
            claims: cs.len(),
            candidate_facts: cs.iter().map(|c| &c.fact).collect::<BTreeSet<_>>().len(),
            accepted_facts: 0,
        })
        .collect();
    let claims: Vec<Claim> = per_property.into_iter().flatten().collect();
    if claims.is_empty() {
        log::info!("no claims found for any predicted property of {entity}");
        return Ok(EnrichmentResult::empty(entity, diagnostics));
    }
    let known: BTreeSet<FactKey> = claims
        .iter()
        .map(|c| &c.fact)
        .filter(|f| kb.contains(f) || prior.contains(*f))
        .cloned()
        .collect();
    let cardinality = predict_cardinalities(kb, truth.multi_value_share);
    let out = verify(&claims, &known, &cardinality, truth)?;
    for d in &mut diagnostics {
        d.accepted_facts = out
            .facts
            .iter()
            .filter(|f| f.label && f.fact.property == d.property)
            .count();
    }
    Ok(EnrichmentResult {
        entity: entity.to_string(),
        properties: diagnostics,
        facts: out.facts,
        sources: out.sources,
        converged: out.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditAction {
    /// A verified fact was inserted.
    Added,
    /// The fact was already present; nothing changed.
    Skipped,
    /// A relation value matched no entity and a typed entity was created.
    CreatedEntity,
    /// As `CreatedEntity`, but the relation has no declared range so the
    /// new entity stays untyped.
    CreatedUntyped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub action: AuditAction,
    pub entity: String,
    pub property: String,
    pub value: String,
    pub kind: ValueKind,
    pub z: f64,
    pub sources: Vec<String>,
}

impl AuditEntry {
    fn new(action: AuditAction, fact: &FactKey, z: f64, sources: &[String]) -> Self {
        AuditEntry {
            action,
            entity: fact.subject.clone(),
            property: fact.property.clone(),
            value: fact.object.text.clone(),
            kind: fact.object.kind,
            z,
            sources: sources.to_vec(),
        }
    }
}

/// Resolves a relation value to an entity id: exact id first, then exact
/// `name` literal. `None` when neither matches.
fn resolve_entity<'a>(kb: &'a KnowledgeBase, text: &'a str) -> Option<&'a str> {
    if kb.has_entity(text) {
        Some(text)
    } else {
        kb.entity_by_name(text)
    }
}

/// Inserts the accepted facts of `enrichment` into a copy of `kb`.
/// Relation values are linked to existing entities by id or name; unmatched
/// values become new entities typed by the property's range in `ranges`.
/// Applying the same enrichment again leaves the KB unchanged.
pub fn write_back(
    kb: &KnowledgeBase,
    enrichment: &EnrichmentResult,
    ranges: &BTreeMap<String, String>,
) -> (KnowledgeBase, Vec<AuditEntry>) {
    let mut out = kb.clone();
    let mut audit = Vec::new();
    for vf in enrichment.accepted() {
        let mut key = vf.fact.clone();
        if key.object.kind == ValueKind::Entity {
            match resolve_entity(&out, &key.object.text).map(str::to_string) {
                Some(id) => key.object = Value::entity(id),
                None => {
                    let id = key.object.text.clone();
                    match ranges.get(&key.property) {
                        Some(class) => {
                            out.insert(Fact::new(&id, TYPE_PROPERTY, Value::class(class)));
                            let typed = FactKey::new(&id, TYPE_PROPERTY, Value::class(class));
                            audit.push(AuditEntry::new(AuditAction::CreatedEntity, &typed, vf.z, &vf.sources));
                        }
                        None => {
                            out.add_entity(&id);
                            audit.push(AuditEntry::new(AuditAction::CreatedUntyped, &key, vf.z, &vf.sources));
                        }
                    }
                }
            }
        }
        let action = if out.insert(Fact::from(key.clone())) {
            AuditAction::Added
        } else {
            AuditAction::Skipped
        };
        audit.push(AuditEntry::new(action, &key, vf.z, &vf.sources));
    }
    (out, audit)
}

/// One JSON object per line.
pub fn write_audit(path: impl AsRef<Path>, audit: &[AuditEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for a in audit {
        serde_json::to_writer(&mut buf, a)?;
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(facts: Vec<(FactKey, f64, bool)>) -> EnrichmentResult {
        EnrichmentResult {
            entity: "e".into(),
            properties: Vec::new(),
            facts: facts
                .into_iter()
                .map(|(fact, z, label)| VerifiedFact {
                    fact,
                    z,
                    label,
                    sources: vec!["s1".into()],
                })
                .collect(),
            sources: Vec::new(),
            converged: true,
        }
    }

    fn base() -> KnowledgeBase {
        KnowledgeBase::from_facts([
            Fact::new("e", TYPE_PROPERTY, Value::class("Film")),
            Fact::new("e", "title", Value::literal("X")),
            Fact::new("bob", "name", Value::literal("Bob Smith")),
        ])
    }

    #[test]
    fn existing_fact_is_skipped() {
        let kb = base();
        let r = result(vec![(FactKey::new("e", "title", Value::literal("X")), 0.9, true)]);
        let (out, audit) = write_back(&kb, &r, &BTreeMap::new());
        assert_eq!(out, kb);
        assert_eq!(audit[0].action, AuditAction::Skipped);
    }

    #[test]
    fn relation_links_by_id_and_name() {
        let kb = base();
        let r = result(vec![
            (FactKey::new("e", "director", Value::entity("bob")), 0.9, true),
            (FactKey::new("e", "writer", Value::entity("Bob Smith")), 0.9, true),
            (FactKey::new("e", "year", Value::literal("1999")), 0.2, false),
        ]);
        let (out, audit) = write_back(&kb, &r, &BTreeMap::new());
        assert_eq!(out.entities().len(), kb.entities().len());
        assert!(out.contains(&FactKey::new("e", "director", Value::entity("bob"))));
        assert!(out.contains(&FactKey::new("e", "writer", Value::entity("bob"))));
        assert!(!out.contains(&FactKey::new("e", "year", Value::literal("1999"))));
        assert_eq!(audit.len(), 2);
    }

    #[test]
    fn unknown_value_gets_range_type_or_is_flagged() {
        let kb = base();
        let r = result(vec![
            (FactKey::new("e", "director", Value::entity("carol")), 0.8, true),
            (FactKey::new("e", "studio", Value::entity("acme")), 0.8, true),
        ]);
        let ranges = BTreeMap::from([("director".to_string(), "Person".to_string())]);
        let (out, audit) = write_back(&kb, &r, &ranges);
        assert!(out.types_of("carol").unwrap().contains("Person"));
        assert!(out.has_entity("acme") && out.types_of("acme").is_none());
        let actions: Vec<AuditAction> = audit.iter().map(|a| a.action).collect();
        assert_eq!(
            actions,
            vec![
                AuditAction::CreatedEntity,
                AuditAction::Added,
                AuditAction::CreatedUntyped,
                AuditAction::Added
            ]
        );
        let (again, audit2) = write_back(&out, &r, &ranges);
        assert_eq!(again, out);
        assert!(audit2.iter().all(|a| a.action == AuditAction::Skipped));
    }

    #[test]
    fn config_paths_resolve_against_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pipeline.toml");
        fs::write(&path, "m = 5\n[paths]\nkb = \"kb.tsv\"\ngraph = \"nowhere/g.json\"\n[ranges]\ndirector = \"Person\"\n").unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.m, 5);
        assert_eq!(cfg.paths.kb.as_deref(), Some(dir.path().join("kb.tsv").as_path()));
        assert!(cfg.check_paths().is_err());
        assert!(PipelineConfig::from_toml("m = 0").is_err());
        assert!(PipelineConfig::from_toml("bogus = [").is_err());
    }
}
