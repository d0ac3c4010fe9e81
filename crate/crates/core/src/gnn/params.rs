use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::math::Mat;
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnnConfig {
    /// Embedding and latent vector dimension (d1).
    pub dim: usize,
    /// Attention hidden size (d2).
    pub attention_dim: usize,
    /// Number of MLP hidden layers (l).
    pub hidden_layers: usize,
    /// Entity neighbours per node when the graph is built from this config.
    pub neighbors: usize,
    pub learning_rate: f64,
    /// Floor of the polynomially decayed learning rate.
    pub min_learning_rate: f64,
    pub decay_power: f64,
    pub negatives_per_positive: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub init_std: f64,
    pub seed: u64,
    /// Softmax attention when true, uniform 1/|N| coefficients otherwise.
    pub attention_enabled: bool,
    /// Separate attention parameters for the three neighbour roles.
    pub per_role_attention: bool,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            dim: 16,
            attention_dim: 16,
            hidden_layers: 1,
            neighbors: 10,
            learning_rate: 0.01,
            min_learning_rate: 1e-4,
            decay_power: 1.0,
            negatives_per_positive: 4,
            batch_size: 512,
            epochs: 100,
            init_std: 0.1,
            seed: 0,
            attention_enabled: true,
            per_role_attention: false,
        }
    }
}

impl GnnConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("dim", self.dim),
            ("attention_dim", self.attention_dim),
            ("hidden_layers", self.hidden_layers),
            ("neighbors", self.neighbors),
            ("negatives_per_positive", self.negatives_per_positive),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.init_std > 0.0) {
            return Err(Error::Config("init_std must be positive".into()));
        }
        Ok(())
    }

    pub fn attention_sets(&self) -> usize {
        if self.per_role_attention {
            3
        } else {
            1
        }
    }
}

/// Which neighbour list an attention coefficient belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// ζ: entity attending to its properties.
    EntityProperty,
    /// η: entity attending to its similar entities.
    EntityEntity,
    /// θ: property attending to the entities that use it.
    PropertyEntity,
}

impl Role {
    pub(crate) fn slot(self, sets: usize) -> usize {
        if sets == 1 {
            0
        } else {
            self as usize
        }
    }
}

/// Scorer `w2ᵀ σ(W1 [x; c] + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Mat,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnParams {
    pub entity_embeddings: Mat,
    pub property_embeddings: Mat,
    pub agg_weight: Mat,
    pub agg_bias: Vec<f64>,
    pub attention: Vec<AttentionParams>,
    pub hidden: Vec<DenseLayer>,
    pub out_weight: Vec<f64>,
    pub out_bias: f64,
}

impl GnnParams {
    pub fn zeros(n: usize, m: usize, cfg: &GnnConfig) -> Self {
        let d1 = cfg.dim;
        let d2 = cfg.attention_dim;
        GnnParams {
            entity_embeddings: Mat::zeros(n, d1),
            property_embeddings: Mat::zeros(m, d1),
            agg_weight: Mat::zeros(d1, d1),
            agg_bias: vec![0.0; d1],
            attention: (0..cfg.attention_sets())
                .map(|_| AttentionParams {
                    w1: Mat::zeros(d2, 2 * d1),
                    b1: vec![0.0; d2],
                    w2: vec![0.0; d2],
                    b2: 0.0,
                })
                .collect(),
            hidden: (0..cfg.hidden_layers)
                .map(|_| DenseLayer {
                    weight: Mat::zeros(d1, d1),
                    bias: vec![0.0; d1],
                })
                .collect(),
            out_weight: vec![0.0; d1],
            out_bias: 0.0,
        }
    }

    /// Every entry drawn from Normal(0, init_std²).
    pub fn init(n: usize, m: usize, cfg: &GnnConfig) -> Result<Self> {
        cfg.validate()?;
        let mut params = Self::zeros(n, m, cfg);
        let normal = Normal::new(0.0, cfg.init_std)
            .map_err(|e| Error::Config(format!("init_std: {e}")))?;
        let mut rng = rng_for(cfg.seed, "gnn/init");
        for (_, t) in params.tensors_mut() {
            for x in t.iter_mut() {
                *x = normal.sample(&mut rng);
            }
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn dim(&self) -> usize {
        self.agg_bias.len()
    }

    pub fn attention_for(&self, role: Role) -> &AttentionParams {
        &self.attention[role.slot(self.attention.len())]
    }

    /// Named views of every parameter group, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("entity_embeddings".into(), &self.entity_embeddings.data),
            ("property_embeddings".into(), &self.property_embeddings.data),
            ("agg_weight".into(), &self.agg_weight.data),
            ("agg_bias".into(), &self.agg_bias),
        ];
        for (r, a) in self.attention.iter().enumerate() {
            out.push((format!("attention{r}.w1"), &a.w1.data));
            out.push((format!("attention{r}.b1"), &a.b1));
            out.push((format!("attention{r}.w2"), &a.w2));
            out.push((format!("attention{r}.b2"), std::slice::from_ref(&a.b2)));
        }
        for (l, layer) in self.hidden.iter().enumerate() {
            out.push((format!("hidden{l}.weight"), &layer.weight.data));
            out.push((format!("hidden{l}.bias"), &layer.bias));
        }
        out.push(("out_weight".into(), &self.out_weight));
        out.push(("out_bias".into(), std::slice::from_ref(&self.out_bias)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("entity_embeddings".into(), &mut self.entity_embeddings.data),
            ("property_embeddings".into(), &mut self.property_embeddings.data),
            ("agg_weight".into(), &mut self.agg_weight.data),
            ("agg_bias".into(), &mut self.agg_bias),
        ];
        for (r, a) in self.attention.iter_mut().enumerate() {
            out.push((format!("attention{r}.w1"), &mut a.w1.data));
            out.push((format!("attention{r}.b1"), &mut a.b1));
            out.push((format!("attention{r}.w2"), &mut a.w2));
            out.push((format!("attention{r}.b2"), std::slice::from_mut(&mut a.b2)));
        }
        for (l, layer) in self.hidden.iter_mut().enumerate() {
            out.push((format!("hidden{l}.weight"), &mut layer.weight.data));
            out.push((format!("hidden{l}.bias"), &mut layer.bias));
        }
        out.push(("out_weight".into(), &mut self.out_weight));
        out.push(("out_bias".into(), std::slice::from_mut(&mut self.out_bias)));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}
