//! Candidate-fact sources.
//!
//! Real value extraction (vertical sites, text, tables) plugs in behind the
//! [`Extractor`] trait. For experiments the crate ships a seeded simulator:
//! source sizes follow a truncated discrete power law, so most sources make
//! one or two claims and a few make many, and each source reports noisy
//! confidences around the planted truth with its own error variance.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{FactKey, Value, ValueKind};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceType {
    Vertical,
    Text,
    Structured,
}

impl SourceType {
    pub const ALL: [SourceType; 3] = [SourceType::Vertical, SourceType::Text, SourceType::Structured];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceType::Vertical => "vertical",
            SourceType::Text => "text",
            SourceType::Structured => "structured",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub id: String,
    pub source_type: SourceType,
    /// Generation-side error variance; never visible to inference.
    pub true_error_variance: f64,
    pub claim_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub fact: FactKey,
    pub source: String,
    /// Confidence in [0, 1] that the source asserts the fact.
    pub observation: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorDescriptor {
    pub name: String,
    pub source_type: SourceType,
}

/// Anything that can produce claims about an (entity, property) pair.
/// Implementations must return observations in [0, 1].
pub trait Extractor {
    fn descriptor(&self) -> ExtractorDescriptor;
    fn extract(&self, entity: &str, property: &str) -> Vec<Claim>;
}

/// Serves the claims of one source type from a simulated world.
#[derive(Debug, Clone)]
pub struct SimulatedExtractor {
    source_type: SourceType,
    by_pair: BTreeMap<(String, String), Vec<Claim>>,
}

impl SimulatedExtractor {
    pub fn new(world: &World, source_type: SourceType) -> Self {
        let types: BTreeMap<&str, SourceType> = world
            .sources
            .iter()
            .map(|s| (s.id.as_str(), s.source_type))
            .collect();
        let claims = world
            .claims
            .iter()
            .filter(|c| types.get(c.source.as_str()) == Some(&source_type))
            .cloned();
        Self::from_claims(claims, source_type)
    }

    /// Serves every given claim under one source type.
    pub fn from_claims(claims: impl IntoIterator<Item = Claim>, source_type: SourceType) -> Self {
        let mut by_pair: BTreeMap<(String, String), Vec<Claim>> = BTreeMap::new();
        for c in claims {
            by_pair
                .entry((c.fact.subject.clone(), c.fact.property.clone()))
                .or_default()
                .push(c);
        }
        SimulatedExtractor {
            source_type,
            by_pair,
        }
    }

    /// One extractor per source type.
    pub fn all(world: &World) -> Vec<SimulatedExtractor> {
        SourceType::ALL.iter().map(|t| Self::new(world, *t)).collect()
    }
}

impl Extractor for SimulatedExtractor {
    fn descriptor(&self) -> ExtractorDescriptor {
        ExtractorDescriptor {
            name: format!("simulated-{}", self.source_type.as_str()),
            source_type: self.source_type,
        }
    }

    fn extract(&self, entity: &str, property: &str) -> Vec<Claim> {
        self.by_pair
            .get(&(entity.to_string(), property.to_string()))
            .cloned()
            .unwrap_or_default()
    }
}

/// Merges claim lists into one claim per (fact, source), keeping the
/// largest observation on collisions. Output is sorted by fact then source.
pub fn merge_claims<I, L>(lists: I) -> Vec<Claim>
where
    I: IntoIterator<Item = L>,
    L: IntoIterator<Item = Claim>,
{
    let mut merged: BTreeMap<(FactKey, String), f64> = BTreeMap::new();
    for list in lists {
        for c in list {
            merged
                .entry((c.fact, c.source))
                .and_modify(|o| *o = o.max(c.observation))
                .or_insert(c.observation);
        }
    }
    merged
        .into_iter()
        .map(|((fact, source), observation)| Claim {
            fact,
            source,
            observation,
        })
        .collect()
}

/// Parameters of the claim simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    pub n_sources: usize,
    pub powerlaw_exponent: f64,
    /// Error variances are drawn uniformly from this range.
    pub variance_range: (f64, f64),
    pub seed: u64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            n_sources: 50,
            powerlaw_exponent: 2.0,
            variance_range: (0.01, 0.25),
            seed: 0,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sources == 0 {
            return Err(Error::Config("n_sources must be at least 1".into()));
        }
        if !(self.powerlaw_exponent > 1.0) {
            return Err(Error::Config(format!(
                "power-law exponent must exceed 1, got {}",
                self.powerlaw_exponent
            )));
        }
        let (lo, hi) = self.variance_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!(
                "variance range must satisfy 0 < lo <= hi <= 1, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Full world parameters: a synthetic fact pool plus the claim simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub n_facts: usize,
    /// Probability that a planted fact is true.
    pub truth_prior: f64,
    /// Share of facts marked as known prior truths (drawn from true facts).
    pub prior_fraction: f64,
    /// Candidate values per (entity, property) group are 1..=this.
    pub max_values_per_group: usize,
    pub sources: SourceConfig,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            n_facts: 200,
            truth_prior: 0.5,
            prior_fraction: 0.1,
            max_values_per_group: 4,
            sources: SourceConfig::default(),
        }
    }
}

/// A candidate fact with its planted truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedFact {
    pub fact: FactKey,
    pub truth: bool,
    pub prior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub sources: Vec<Source>,
    pub claims: Vec<Claim>,
    pub truths: BTreeMap<FactKey, bool>,
    pub prior_truths: BTreeSet<FactKey>,
}

impl World {
    pub fn true_facts(&self) -> BTreeSet<FactKey> {
        self.truths
            .iter()
            .filter(|(_, t)| **t)
            .map(|(f, _)| f.clone())
            .collect()
    }
}

/// Draws from the zeta distribution with exponent `s` truncated to 1..=max.
pub struct TruncatedZeta {
    cdf: Vec<f64>,
}

impl TruncatedZeta {
    pub fn new(s: f64, max: usize) -> Result<Self> {
        if !(s > 1.0) || max == 0 {
            return Err(Error::Config(format!("invalid zeta parameters s={s}, max={max}")));
        }
        let mut cdf = Vec::with_capacity(max);
        let mut acc = 0.0;
        for k in 1..=max {
            acc += (k as f64).powf(-s);
            cdf.push(acc);
        }
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        Ok(TruncatedZeta { cdf })
    }

    pub fn probability(&self, k: usize) -> f64 {
        match k {
            0 => 0.0,
            1 => self.cdf[0],
            k if k <= self.cdf.len() => self.cdf[k - 1] - self.cdf[k - 2],
            _ => 0.0,
        }
    }
}

impl Distribution<usize> for TruncatedZeta {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1) + 1
    }
}

/// Simulates claims about a given pool of labelled facts.
///
/// Every fact receives at least one claim: facts missed by the power-law
/// draw are handed to a source chosen with probability proportional to its
/// drawn size.
pub fn simulate_claims(facts: &[PlantedFact], cfg: &SourceConfig) -> Result<World> {
    cfg.validate()?;
    if facts.is_empty() {
        return Err(Error::Config("cannot simulate claims for an empty fact pool".into()));
    }
    let mut rng = rng_for(cfg.seed, "world/claims");
    let n = facts.len();
    let zeta = TruncatedZeta::new(cfg.powerlaw_exponent, n)?;
    let (lo, hi) = cfg.variance_range;
    let width = (cfg.n_sources as f64).log10().floor() as usize + 1;

    let mut sources = Vec::with_capacity(cfg.n_sources);
    let mut claimed: Vec<BTreeSet<usize>> = Vec::with_capacity(cfg.n_sources);
    for s in 0..cfg.n_sources {
        let count = zeta.sample(&mut rng);
        let variance = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let source_type = SourceType::ALL[rng.random_range(0..3)];
        claimed.push(sample(&mut rng, n, count).into_iter().collect());
        sources.push(Source {
            id: format!("s{s:0width$}"),
            source_type,
            true_error_variance: variance,
            claim_count: count,
        });
    }
    let mut covered = vec![false; n];
    for set in &claimed {
        for &f in set {
            covered[f] = true;
        }
    }
    let total: usize = sources.iter().map(|s| s.claim_count).sum();
    for (f, done) in covered.iter().enumerate() {
        if *done {
            continue;
        }
        let mut pick = rng.random_range(0..total);
        let mut s = 0;
        while pick >= sources[s].claim_count {
            pick -= sources[s].claim_count;
            s += 1;
        }
        claimed[s].insert(f);
    }

    let mut claims = Vec::new();
    for (src, set) in sources.iter_mut().zip(&claimed) {
        src.claim_count = set.len();
        let noise = Normal::new(0.0, src.true_error_variance.sqrt())
            .map_err(|e| Error::Config(e.to_string()))?;
        for &f in set {
            let z = if facts[f].truth { 1.0 } else { 0.0 };
            let o: f64 = z + noise.sample(&mut rng);
            claims.push(Claim {
                fact: facts[f].fact.clone(),
                source: src.id.clone(),
                observation: o.clamp(0.0, 1.0),
            });
        }
    }
    claims.sort_by(|a, b| (&a.fact, &a.source).cmp(&(&b.fact, &b.source)));
    Ok(World {
        sources,
        claims,
        truths: facts.iter().map(|p| (p.fact.clone(), p.truth)).collect(),
        prior_truths: facts
            .iter()
            .filter(|p| p.prior)
            .map(|p| p.fact.clone())
            .collect(),
    })
}

/// Plants `n_facts` candidate facts in (entity, property) groups, each true
/// with probability `truth_prior`, marks a share of the true ones as prior
/// truths, and simulates claims about them.
pub fn generate_world(cfg: &WorldConfig) -> Result<World> {
    cfg.sources.validate()?;
    if cfg.n_facts == 0 {
        return Err(Error::Config("n_facts must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.truth_prior) || !(0.0..=1.0).contains(&cfg.prior_fraction) {
        return Err(Error::Config("truth_prior and prior_fraction must lie in [0,1]".into()));
    }
    let mut rng = rng_for(cfg.sources.seed, "world/facts");
    let max_values = cfg.max_values_per_group.max(1);
    let mut facts = Vec::with_capacity(cfg.n_facts);
    let mut group = 0usize;
    while facts.len() < cfg.n_facts {
        let size = rng.random_range(1..=max_values).min(cfg.n_facts - facts.len());
        let entity = format!("w{:04}", group / 3);
        let property = format!("wp{}", group % 3);
        for v in 0..size {
            facts.push(PlantedFact {
                fact: FactKey::new(&entity, &property, Value::literal(format!("{property}-g{group}-v{v}"))),
                truth: rng.random_bool(cfg.truth_prior),
                prior: false,
            });
        }
        group += 1;
    }
    let true_idx: Vec<usize> = (0..facts.len()).filter(|&i| facts[i].truth).collect();
    let n_prior = ((cfg.prior_fraction * cfg.n_facts as f64).round() as usize).min(true_idx.len());
    for k in sample(&mut rng, true_idx.len(), n_prior) {
        facts[true_idx[k]].prior = true;
    }
    simulate_claims(&facts, &cfg.sources)
}

// ---- file formats -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ClaimRecord {
    entity: String,
    property: String,
    value: String,
    kind: ValueKind,
    source: String,
    observation: f64,
}

#[derive(Serialize, Deserialize)]
struct FactRecord {
    entity: String,
    property: String,
    value: String,
    kind: ValueKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<bool>,
}

fn fact_from(entity: String, property: String, value: String, kind: ValueKind) -> FactKey {
    FactKey::new(entity, property, Value::new(kind, value))
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn write_lines<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, &item)?;
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_claims(path: impl AsRef<Path>, claims: &[Claim]) -> Result<()> {
    write_lines(
        path.as_ref(),
        claims.iter().map(|c| ClaimRecord {
            entity: c.fact.subject.clone(),
            property: c.fact.property.clone(),
            value: c.fact.object.text.clone(),
            kind: c.fact.object.kind,
            source: c.source.clone(),
            observation: c.observation,
        }),
    )
}

pub fn read_claims(path: impl AsRef<Path>) -> Result<Vec<Claim>> {
    let recs: Vec<ClaimRecord> = read_lines(path.as_ref())?;
    recs.into_iter()
        .enumerate()
        .map(|(i, r)| {
            if !(0.0..=1.0).contains(&r.observation) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("observation {} outside [0,1]", r.observation),
                });
            }
            Ok(Claim {
                fact: fact_from(r.entity, r.property, r.value, r.kind),
                source: r.source,
                observation: r.observation,
            })
        })
        .collect()
}

/// Fact list, optionally with truth values (`truth` omitted when `None`).
pub fn write_facts<'a>(
    path: impl AsRef<Path>,
    facts: impl IntoIterator<Item = (&'a FactKey, Option<bool>)>,
) -> Result<()> {
    write_lines(
        path.as_ref(),
        facts.into_iter().map(|(f, truth)| FactRecord {
            entity: f.subject.clone(),
            property: f.property.clone(),
            value: f.object.text.clone(),
            kind: f.object.kind,
            truth,
        }),
    )
}

pub fn read_facts(path: impl AsRef<Path>) -> Result<Vec<(FactKey, Option<bool>)>> {
    let recs: Vec<FactRecord> = read_lines(path.as_ref())?;
    Ok(recs
        .into_iter()
        .map(|r| (fact_from(r.entity, r.property, r.value, r.kind), r.truth))
        .collect())
}

pub const CLAIMS_FILE: &str = "claims.jsonl";
pub const TRUTHS_FILE: &str = "truths.jsonl";
pub const PRIOR_FILE: &str = "prior.jsonl";
pub const SOURCES_FILE: &str = "sources.tsv";

/// Writes claims, planted truths, prior truths and the source table as
/// separate files so inference can be pointed at claims and priors only.
pub fn save_world(world: &World, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_claims(dir.join(CLAIMS_FILE), &world.claims)?;
    write_facts(
        dir.join(TRUTHS_FILE),
        world.truths.iter().map(|(f, t)| (f, Some(*t))),
    )?;
    write_facts(dir.join(PRIOR_FILE), world.prior_truths.iter().map(|f| (f, None)))?;
    let path = dir.join(SOURCES_FILE);
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = String::from("source\ttype\ttrue_error_variance\tclaims\n");
    for s in &world.sources {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            s.id,
            s.source_type.as_str(),
            s.true_error_variance,
            s.claim_count
        ));
    }
    f.write_all(out.as_bytes()).map_err(|e| Error::io(&path, e))
}

/// Reads a source table written by [`save_world`].
pub fn read_sources(path: impl AsRef<Path>) -> Result<Vec<Source>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse { line: i + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad(format!("expected 4 columns, found {}", cols.len())));
        }
        let source_type = SourceType::ALL
            .into_iter()
            .find(|t| t.as_str() == cols[1])
            .ok_or_else(|| bad(format!("unknown source type `{}`", cols[1])))?;
        out.push(Source {
            id: cols[0].to_string(),
            source_type,
            true_error_variance: cols[2].parse().map_err(|e| bad(format!("variance: {e}")))?,
            claim_count: cols[3].parse().map_err(|e| bad(format!("claim count: {e}")))?,
        });
    }
    Ok(out)
}
