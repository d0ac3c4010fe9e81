use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{
    entity_backward, entity_forward, property_backward, property_forward, score_backward,
    score_forward, NodeTrace,
};
use super::math::softplus;
use super::params::{GnnConfig, GnnParams};
use crate::error::{Error, Result};
use crate::graph::EntityPropertyGraph;
use crate::rng::rng_for;

const LOG_FLOOR: f64 = 1e-12;

/// One labelled (entity, property) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub entity: usize,
    pub property: usize,
    pub target: f64,
}

impl Example {
    pub fn new(entity: usize, property: usize, target: f64) -> Self {
        Example {
            entity,
            property,
            target,
        }
    }
}

/// Cross-entropy of probability `y` against `target`, logs clamped at 1e-12.
pub fn binary_cross_entropy(y: f64, target: f64) -> f64 {
    -(target * y.max(LOG_FLOOR).ln() + (1.0 - target) * (1.0 - y).max(LOG_FLOOR).ln())
}

/// Same loss evaluated from the logit, with its derivative.
fn bce_from_logit(logit: f64, target: f64) -> (f64, f64) {
    let floor = LOG_FLOOR.ln();
    let log_y = -softplus(-logit);
    let log_not_y = -softplus(logit);
    let y = super::math::sigmoid(logit);
    let mut loss = 0.0;
    let mut grad = 0.0;
    if target != 0.0 {
        loss -= target * log_y.max(floor);
        if log_y > floor {
            grad -= target * (1.0 - y);
        }
    }
    if target != 1.0 {
        loss -= (1.0 - target) * log_not_y.max(floor);
        if log_not_y > floor {
            grad += (1.0 - target) * y;
        }
    }
    (loss, grad)
}

/// Forward traces for the nodes touched by a batch.
struct BatchForward {
    entities: Vec<Option<NodeTrace>>,
    properties: Vec<Option<NodeTrace>>,
}

fn forward_batch(
    graph: &EntityPropertyGraph,
    params: &GnnParams,
    attention: bool,
    batch: &[Example],
) -> BatchForward {
    let mut entities: Vec<Option<NodeTrace>> = vec![None; graph.n_entities()];
    let mut properties: Vec<Option<NodeTrace>> = vec![None; graph.n_properties()];
    for ex in batch {
        if entities[ex.entity].is_none() {
            entities[ex.entity] = Some(entity_forward(graph, params, attention, ex.entity));
        }
        if properties[ex.property].is_none() {
            properties[ex.property] = Some(property_forward(graph, params, attention, ex.property));
        }
    }
    BatchForward {
        entities,
        properties,
    }
}

/// Summed cross-entropy over `batch`.
pub fn loss(graph: &EntityPropertyGraph, params: &GnnParams, attention: bool, batch: &[Example]) -> f64 {
    let fw = forward_batch(graph, params, attention, batch);
    batch
        .iter()
        .map(|ex| {
            let h = &fw.entities[ex.entity].as_ref().unwrap().latent;
            let k = &fw.properties[ex.property].as_ref().unwrap().latent;
            bce_from_logit(score_forward(params, h, k).logit, ex.target).0
        })
        .sum()
}

/// Summed cross-entropy over `batch` and its gradient for every parameter.
pub fn loss_and_grad(
    graph: &EntityPropertyGraph,
    params: &GnnParams,
    attention: bool,
    batch: &[Example],
) -> (f64, GnnParams) {
    let fw = forward_batch(graph, params, attention, batch);
    let mut grads = params.zeros_like();
    let d1 = params.dim();
    let mut dh = vec![vec![0.0; d1]; graph.n_entities()];
    let mut dk = vec![vec![0.0; d1]; graph.n_properties()];
    let mut total = 0.0;
    for ex in batch {
        let h = &fw.entities[ex.entity].as_ref().unwrap().latent;
        let k = &fw.properties[ex.property].as_ref().unwrap().latent;
        let st = score_forward(params, h, k);
        let (l, dlogit) = bce_from_logit(st.logit, ex.target);
        total += l;
        if dlogit == 0.0 {
            continue;
        }
        let (gh, gk) = score_backward(params, &mut grads, &st, h, k, dlogit);
        super::math::axpy(1.0, &gh, &mut dh[ex.entity]);
        super::math::axpy(1.0, &gk, &mut dk[ex.property]);
    }
    for (i, t) in fw.entities.iter().enumerate() {
        if let Some(t) = t {
            entity_backward(params, &mut grads, i, t, &dh[i]);
        }
    }
    for (j, t) in fw.properties.iter().enumerate() {
        if let Some(t) = t {
            property_backward(params, &mut grads, j, t, &dk[j]);
        }
    }
    (total, grads)
}

/// Adam with polynomially decayed step size.
struct Adam {
    m: GnnParams,
    v: GnnParams,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(params: &GnnParams) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut GnnParams, grads: &GnnParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        let groups = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for ((((_, p), (_, g)), (_, m)), (_, v)) in groups {
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// `lr0 · (1 − t/T)^power`, floored.
pub fn decayed_learning_rate(cfg: &GnnConfig, step: usize, total_steps: usize) -> f64 {
    let frac = if total_steps == 0 {
        0.0
    } else {
        (step as f64 / total_steps as f64).min(1.0)
    };
    (cfg.learning_rate * (1.0 - frac).powf(cfg.decay_power)).max(cfg.min_learning_rate)
}

/// Every (entity, used property) pair of the graph.
pub fn positive_examples(graph: &EntityPropertyGraph) -> Vec<Example> {
    graph
        .entity_properties
        .iter()
        .enumerate()
        .flat_map(|(i, ps)| ps.iter().map(move |&j| Example::new(i, j, 1.0)))
        .collect()
}

/// Positives plus `negatives_per_positive` uniformly drawn unused
/// properties per positive.
pub fn sample_epoch(graph: &EntityPropertyGraph, cfg: &GnnConfig, rng: &mut impl Rng) -> Vec<Example> {
    let m = graph.n_properties();
    let mut out = Vec::new();
    for (i, used) in graph.entity_properties.iter().enumerate() {
        let unused: Vec<usize> = (0..m).filter(|j| used.binary_search(j).is_err()).collect();
        for &j in used {
            out.push(Example::new(i, j, 1.0));
            if unused.is_empty() {
                continue;
            }
            for _ in 0..cfg.negatives_per_positive {
                out.push(Example::new(i, unused[rng.random_range(0..unused.len())], 0.0));
            }
        }
    }
    out.shuffle(rng);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: GnnConfig,
    pub params: GnnParams,
    /// Mean per-example loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn train(graph: &EntityPropertyGraph, cfg: &GnnConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    if graph.ep_edge_count() == 0 {
        return Err(Error::NoPositives);
    }
    let mut params = GnnParams::init(graph.n_entities(), graph.n_properties(), cfg)?;
    let mut rng = rng_for(cfg.seed, "gnn/train");
    let mut adam = Adam::new(&params);
    let per_epoch = graph.ep_edge_count() * (1 + cfg.negatives_per_positive);
    let total_steps = cfg.epochs * per_epoch.div_ceil(cfg.batch_size);
    let mut step = 0;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let examples = sample_epoch(graph, cfg, &mut rng);
        let mut sum = 0.0;
        for batch in examples.chunks(cfg.batch_size) {
            let (l, grads) = loss_and_grad(graph, &params, cfg.attention_enabled, batch);
            sum += l;
            let lr = decayed_learning_rate(cfg, step, total_steps);
            adam.step(&mut params, &grads, lr);
            step += 1;
            if !params.all_finite() {
                return Err(Error::Config(format!(
                    "non-finite parameters after step {step} (epoch {epoch})"
                )));
            }
        }
        epoch_losses.push(sum / examples.len() as f64);
    }
    Ok(TrainedModel {
        config: cfg.clone(),
        params,
        epoch_losses,
    })
}

impl TrainedModel {
    /// Scores of every property for entity index `i`.
    pub fn score_all(&self, graph: &EntityPropertyGraph, i: usize) -> Vec<f64> {
        let attention = self.config.attention_enabled;
        let h = entity_forward(graph, &self.params, attention, i).latent;
        (0..graph.n_properties())
            .map(|j| {
                let k = property_forward(graph, &self.params, attention, j).latent;
                score_forward(&self.params, &h, &k).y
            })
            .collect()
    }

    /// Top-`m` properties not yet used by `entity`, by descending score with
    /// ties broken by property id.
    pub fn rank_properties(
        &self,
        graph: &EntityPropertyGraph,
        entity: &str,
        m: usize,
    ) -> Result<Vec<(String, f64)>> {
        let i = graph
            .entity_index(entity)
            .ok_or_else(|| Error::UnknownEntity(entity.to_string()))?;
        let scores = self.score_all(graph, i);
        let mut ranked: Vec<(usize, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|(j, _)| !graph.uses(i, *j))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(ranked
            .into_iter()
            .take(m)
            .map(|(j, s)| (graph.property_ids[j].clone(), s))
            .collect())
    }
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointShape {
    pub entities: usize,
    pub properties: usize,
    pub dim: usize,
    pub attention_dim: usize,
    pub hidden_layers: usize,
    pub attention_sets: usize,
}

/// Versioned JSON checkpoint with a shape header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub shape: CheckpointShape,
    pub entity_ids: Vec<String>,
    pub property_ids: Vec<String>,
    pub model: TrainedModel,
}

impl Checkpoint {
    pub fn new(graph: &EntityPropertyGraph, model: TrainedModel) -> Self {
        let cfg = &model.config;
        Checkpoint {
            version: CHECKPOINT_VERSION,
            shape: CheckpointShape {
                entities: graph.n_entities(),
                properties: graph.n_properties(),
                dim: cfg.dim,
                attention_dim: cfg.attention_dim,
                hidden_layers: cfg.hidden_layers,
                attention_sets: cfg.attention_sets(),
            },
            entity_ids: graph.entity_ids.clone(),
            property_ids: graph.property_ids.clone(),
            model,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let s = serde_json::to_string(self)?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&s)?;
        ck.validate()?;
        Ok(ck)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        let p = &self.model.params;
        let s = &self.shape;
        let ok = p.entity_embeddings.rows == s.entities
            && p.property_embeddings.rows == s.properties
            && p.dim() == s.dim
            && p.attention.len() == s.attention_sets
            && p.attention.iter().all(|a| a.b1.len() == s.attention_dim)
            && p.hidden.len() == s.hidden_layers
            && self.entity_ids.len() == s.entities
            && self.property_ids.len() == s.properties;
        if !ok {
            return Err(Error::Checkpoint("parameter shapes disagree with header".into()));
        }
        Ok(())
    }

    /// Confirms the checkpoint was trained on this graph's node set.
    pub fn matches(&self, graph: &EntityPropertyGraph) -> Result<()> {
        if self.entity_ids != graph.entity_ids || self.property_ids != graph.property_ids {
            return Err(Error::Checkpoint(
                "checkpoint node ids differ from the graph".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_values() {
        assert!(binary_cross_entropy(1.0 - 1e-12, 1.0) < 1e-11);
        assert!((binary_cross_entropy(0.5, 1.0) - 0.693_147_180_559_945_3).abs() < 1e-12);
        let a = binary_cross_entropy(0.3, 1.0);
        let b = binary_cross_entropy(0.7, 0.0);
        assert!((a - b).abs() < 1e-12);
        // clamp keeps the loss finite
        assert!((binary_cross_entropy(0.0, 1.0) - 1e-12f64.ln().abs()).abs() < 1e-9);
    }

    #[test]
    fn logit_form_agrees_with_probability_form() {
        for logit in [-8.0, -1.0, 0.0, 0.3, 5.0] {
            for t in [0.0, 1.0] {
                let y = super::super::math::sigmoid(logit);
                let (l, _) = bce_from_logit(logit, t);
                assert!((l - binary_cross_entropy(y, t)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn learning_rate_decays_to_floor() {
        let cfg = GnnConfig::default();
        assert_eq!(decayed_learning_rate(&cfg, 0, 100), 0.01);
        assert!((decayed_learning_rate(&cfg, 50, 100) - 0.005).abs() < 1e-15);
        assert_eq!(decayed_learning_rate(&cfg, 100, 100), 1e-4);
    }
}
