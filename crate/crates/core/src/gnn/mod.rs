//! Attention-based graph neural network for property prediction.

pub mod math;
mod model;
mod params;
mod train;

pub use model::{
    attention_coefficients, entity_forward, property_forward, score, score_forward, AggTrace,
    NodeTrace, ScoreTrace,
};
pub use params::{AttentionParams, DenseLayer, GnnConfig, GnnParams, Role};
pub use train::{
    binary_cross_entropy, decayed_learning_rate, loss, loss_and_grad, positive_examples,
    sample_epoch, train, Checkpoint, CheckpointShape, Example, TrainedModel,
};
