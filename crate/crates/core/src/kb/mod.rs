//! In-memory knowledge base: entities, properties, classes, literals and
//! the facts that connect them, plus the two derived indices used by the
//! similarity measures (declared types and held values per entity).

mod io;
mod split;
pub mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) use io::escape_field;
pub use io::{load_kb, read_jsonl, read_tsv, write_jsonl, write_tsv, KbFormat};
pub use split::{leave_n_out, sample_synthetic_split, DatasetSplit, LeaveOut};

/// An entity is long-tail when it uses at most this many distinct properties.
pub const LONG_TAIL_THRESHOLD: usize = 5;

/// Property under which class membership is conventionally declared.
pub const TYPE_PROPERTY: &str = "type";

/// Property holding a human-readable entity name, used for exact-name lookup.
pub const NAME_PROPERTY: &str = "name";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Entity,
    Class,
    Literal,
}

impl ValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::Entity => "entity",
            ValueKind::Class => "class",
            ValueKind::Literal => "literal",
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValueKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entity" => Ok(ValueKind::Entity),
            "class" => Ok(ValueKind::Class),
            "literal" => Ok(ValueKind::Literal),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

/// The object of a fact: an entity id, a class id or a literal's lexical form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Value {
    pub kind: ValueKind,
    pub text: String,
}

impl Value {
    pub fn new(kind: ValueKind, text: impl Into<String>) -> Self {
        Value {
            kind,
            text: text.into(),
        }
    }

    pub fn entity(text: impl Into<String>) -> Self {
        Self::new(ValueKind::Entity, text)
    }

    pub fn class(text: impl Into<String>) -> Self {
        Self::new(ValueKind::Class, text)
    }

    pub fn literal(text: impl Into<String>) -> Self {
        Self::new(ValueKind::Literal, text)
    }
}

/// Identity of a fact, without its label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FactKey {
    pub subject: String,
    pub property: String,
    pub object: Value,
}

impl FactKey {
    pub fn new(subject: impl Into<String>, property: impl Into<String>, object: Value) -> Self {
        FactKey {
            subject: subject.into(),
            property: property.into(),
            object,
        }
    }
}

impl fmt::Display for FactKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "<{}, {}, {}:{}>",
            self.subject, self.property, self.object.kind, self.object.text
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub subject: String,
    pub property: String,
    pub object: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<bool>,
}

impl Fact {
    pub fn new(subject: impl Into<String>, property: impl Into<String>, object: Value) -> Self {
        Fact {
            subject: subject.into(),
            property: property.into(),
            object,
            label: None,
        }
    }

    pub fn key(&self) -> FactKey {
        FactKey::new(&self.subject, &self.property, self.object.clone())
    }
}

impl From<FactKey> for Fact {
    fn from(k: FactKey) -> Self {
        Fact::new(k.subject, k.property, k.object)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    entities: BTreeSet<String>,
    properties: BTreeSet<String>,
    classes: BTreeSet<String>,
    literals: BTreeSet<String>,
    facts: Vec<Fact>,
    fact_keys: BTreeSet<FactKey>,
    type_index: BTreeMap<String, BTreeSet<String>>,
    value_index: BTreeMap<String, BTreeSet<String>>,
    property_index: BTreeMap<String, BTreeSet<String>>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a KB from facts; duplicates of an existing triple are dropped.
    pub fn from_facts(facts: impl IntoIterator<Item = Fact>) -> Self {
        let mut kb = Self::new();
        for f in facts {
            kb.insert(f);
        }
        kb
    }

    /// Inserts a fact and updates all indices. Returns false if the triple
    /// was already present.
    pub fn insert(&mut self, fact: Fact) -> bool {
        let key = fact.key();
        if self.fact_keys.contains(&key) {
            return false;
        }
        self.entities.insert(fact.subject.clone());
        self.properties.insert(fact.property.clone());
        match fact.object.kind {
            ValueKind::Entity => {
                self.entities.insert(fact.object.text.clone());
            }
            ValueKind::Class => {
                self.classes.insert(fact.object.text.clone());
                self.type_index
                    .entry(fact.subject.clone())
                    .or_default()
                    .insert(fact.object.text.clone());
            }
            ValueKind::Literal => {
                self.literals.insert(fact.object.text.clone());
            }
        }
        self.value_index
            .entry(fact.subject.clone())
            .or_default()
            .insert(fact.object.text.clone());
        self.property_index
            .entry(fact.subject.clone())
            .or_default()
            .insert(fact.property.clone());
        self.fact_keys.insert(key);
        self.facts.push(fact);
        true
    }

    /// Registers an entity that has no facts yet.
    pub fn add_entity(&mut self, id: impl Into<String>) {
        self.entities.insert(id.into());
    }

    pub fn entities(&self) -> &BTreeSet<String> {
        &self.entities
    }

    pub fn properties(&self) -> &BTreeSet<String> {
        &self.properties
    }

    pub fn classes(&self) -> &BTreeSet<String> {
        &self.classes
    }

    pub fn literals(&self) -> &BTreeSet<String> {
        &self.literals
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn contains(&self, key: &FactKey) -> bool {
        self.fact_keys.contains(key)
    }

    pub fn has_entity(&self, e: &str) -> bool {
        self.entities.contains(e)
    }

    pub fn require_entity(&self, e: &str) -> Result<()> {
        if self.has_entity(e) {
            Ok(())
        } else {
            Err(Error::UnknownEntity(e.to_string()))
        }
    }

    pub fn type_index(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.type_index
    }

    pub fn value_index(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.value_index
    }

    pub fn types_of(&self, e: &str) -> Option<&BTreeSet<String>> {
        self.type_index.get(e)
    }

    pub fn values_of(&self, e: &str) -> Option<&BTreeSet<String>> {
        self.value_index.get(e)
    }

    /// Distinct properties used by `e` as a subject.
    pub fn properties_of(&self, e: &str) -> Option<&BTreeSet<String>> {
        self.property_index.get(e)
    }

    pub fn property_count(&self, e: &str) -> usize {
        self.properties_of(e).map_or(0, BTreeSet::len)
    }

    pub fn is_long_tail(&self, e: &str) -> bool {
        self.property_count(e) <= LONG_TAIL_THRESHOLD
    }

    pub fn facts_of<'a>(&'a self, e: &'a str) -> impl Iterator<Item = &'a Fact> + 'a {
        self.facts.iter().filter(move |f| f.subject == e)
    }

    /// Entities directly declared as members of `class`, in id order.
    pub fn members_of(&self, class: &str) -> Vec<String> {
        self.type_index
            .iter()
            .filter(|(_, ts)| ts.contains(class))
            .map(|(e, _)| e.clone())
            .collect()
    }

    /// Exact lookup of an entity by its `name` literal.
    pub fn entity_by_name(&self, name: &str) -> Option<&str> {
        self.facts
            .iter()
            .find(|f| {
                f.property == NAME_PROPERTY
                    && f.object.kind == ValueKind::Literal
                    && f.object.text == name
            })
            .map(|f| f.subject.as_str())
    }

    /// Recomputes type and value indices from the fact list alone.
    pub fn rebuilt_indices(
        &self,
    ) -> (
        BTreeMap<String, BTreeSet<String>>,
        BTreeMap<String, BTreeSet<String>>,
    ) {
        let rebuilt = Self::from_facts(self.facts.iter().cloned());
        (rebuilt.type_index, rebuilt.value_index)
    }

    /// Restricts the KB to facts whose subject is in `keep`, with per-entity
    /// overrides (used for entities that only retain part of their facts).
    pub fn restrict(
        &self,
        keep: &BTreeSet<String>,
        overrides: &BTreeMap<String, Vec<Fact>>,
    ) -> KnowledgeBase {
        let mut out = KnowledgeBase::new();
        for f in &self.facts {
            if keep.contains(&f.subject) && !overrides.contains_key(&f.subject) {
                out.insert(f.clone());
            }
        }
        for facts in overrides.values() {
            for f in facts {
                out.insert(f.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_literal() {
        let kb = KnowledgeBase::from_facts([Fact::new("e1", "p1", Value::literal("x"))]);
        assert_eq!(kb.entities().len(), 1);
        assert_eq!(kb.properties().len(), 1);
        assert_eq!(kb.literals().len(), 1);
        assert_eq!(kb.len(), 1);
    }

    #[test]
    fn duplicate_triple_ignored() {
        let f = Fact::new("e1", "p1", Value::entity("e2"));
        let kb = KnowledgeBase::from_facts([f.clone(), f]);
        assert_eq!(kb.len(), 1);
        assert_eq!(kb.entities().len(), 2);
    }

    #[test]
    fn class_objects_feed_type_index() {
        let kb = KnowledgeBase::from_facts([
            Fact::new("e1", TYPE_PROPERTY, Value::class("Actor")),
            Fact::new("e1", "born", Value::literal("1990")),
        ]);
        assert!(kb.types_of("e1").unwrap().contains("Actor"));
        assert_eq!(kb.values_of("e1").unwrap().len(), 2);
        assert_eq!(kb.members_of("Actor"), vec!["e1".to_string()]);
        assert!(kb.is_long_tail("e1"));
    }

    #[test]
    fn kind_parse_rejects_unknown() {
        assert!(matches!(
            "blank".parse::<ValueKind>(),
            Err(Error::UnknownKind(_))
        ));
    }
}
