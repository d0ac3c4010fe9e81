//! Fact verification: latent truths per fact, source variances integrated
//! out under a conjugate prior, MAP inference by gradient descent, then
//! labelling with property cardinality.

mod chi2;
mod conjugacy;
mod infer;
mod labeling;
mod model;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use chi2::{chi2_cdf, chi2_quantile, chi2_upper_critical};
pub use conjugacy::{conjugacy_check, log_marginal_closed_form, log_marginal_quadrature};
pub use infer::{infer_truths, infer_truths_from, initial_truths, run_inference, Inference, Verification};
pub use labeling::{label_facts, predict_cardinalities, predict_cardinality, Cardinality};
pub use model::{
    clamp_truth, majority_init, negative_log_likelihood, nll_gradient, sample_variance, set_hyperparameters,
    source_reliability, squared_deviation, ClaimSet, IndexedClaim, SourceStats, TruthConfig, DELTA, TAU2_FLOOR,
};

use crate::error::{Error, Result};
use crate::kb::{escape_field, FactKey};
use crate::source_sim::Claim;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifiedFact {
    pub fact: FactKey,
    pub z: f64,
    pub label: bool,
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub source: String,
    pub nu: f64,
    pub tau2: f64,
    pub reliability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub facts: Vec<VerifiedFact>,
    pub sources: Vec<SourceReport>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl VerifyOutput {
    pub fn true_facts(&self) -> BTreeSet<FactKey> {
        self.facts
            .iter()
            .filter(|f| f.label)
            .map(|f| f.fact.clone())
            .collect()
    }
}

/// Full verification of a claim set. Properties missing from
/// `cardinality` are treated as multi-valued.
pub fn verify(
    claims: &[Claim],
    prior: &BTreeSet<FactKey>,
    cardinality: &BTreeMap<String, Cardinality>,
    cfg: &TruthConfig,
) -> Result<VerifyOutput> {
    let set = ClaimSet::new(claims)?;
    let mask = set.mask(prior);
    let v = run_inference(&set, &mask, cfg)?;
    let labels = label_facts(
        &set.facts,
        &v.z,
        |_, p| cardinality.get(p).copied().unwrap_or(Cardinality::Multi),
        cfg.epsilon,
    );
    let facts = set
        .facts
        .iter()
        .enumerate()
        .map(|(f, key)| VerifiedFact {
            fact: key.clone(),
            z: v.z[f],
            label: labels[f],
            sources: set.sources_of(f).into_iter().map(String::from).collect(),
        })
        .collect();
    let sources = set
        .sources
        .iter()
        .zip(&v.stats)
        .zip(&v.reliability)
        .map(|((s, st), &r)| SourceReport {
            source: s.clone(),
            nu: st.nu,
            tau2: st.tau2,
            reliability: r,
        })
        .collect();
    Ok(VerifyOutput {
        facts,
        sources,
        objective: v.objective,
        iterations: v.iterations,
        converged: v.converged,
    })
}

/// Thresholded majority vote, the baseline verifier.
pub fn majority_labels(claims: &[Claim], epsilon: f64) -> Result<BTreeSet<FactKey>> {
    let set = ClaimSet::new(claims)?;
    let z = majority_init(&set)?;
    Ok(set
        .facts
        .into_iter()
        .zip(z)
        .filter(|(_, z)| *z >= epsilon)
        .map(|(f, _)| f)
        .collect())
}

/// TSV with columns entity, property, value, kind, z, label.
pub fn write_verified_facts(path: impl AsRef<Path>, facts: &[VerifiedFact]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("entity\tproperty\tvalue\tkind\tz\tlabel\n");
    for f in facts {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            escape_field(&f.fact.subject),
            escape_field(&f.fact.property),
            escape_field(&f.fact.object.text),
            f.fact.object.kind,
            f.z,
            f.label
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// TSV with columns source, nu, tau2, reliability.
pub fn write_source_reliability(path: impl AsRef<Path>, sources: &[SourceReport]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("source\tnu\ttau2\treliability\n");
    for s in sources {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            escape_field(&s.source),
            s.nu,
            s.tau2,
            s.reliability
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
