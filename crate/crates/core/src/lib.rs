//! Knowledge-base enrichment for long-tail entities.
//!
//! The crate covers the three stages of enriching an under-described
//! entity: predicting which properties it is missing (a graph attention
//! model over an entity-property graph), collecting candidate values from
//! several sources (an extractor interface plus a seeded simulator), and
//! deciding which candidate facts are true (a conjugate-prior model of
//! source error variance solved by MAP gradient descent).

pub mod error;
pub mod eval;
pub mod gnn;
pub mod graph;
pub mod kb;
pub mod pipeline;
pub mod rng;
pub mod similarity;
pub mod source_sim;
pub mod truth;

pub use error::{Error, Result};
