#![allow(dead_code)]

pub mod chi2_table;
pub mod gnn_fixtures;
pub mod truth_fixtures;

use kbenrich_core::eval::EvalConfig;
use kbenrich_core::gnn::GnnConfig;
use kbenrich_core::kb::synthetic::SyntheticKbConfig;

/// A protocol run that finishes in seconds: two small classes, few epochs.
pub fn small_eval_config(seed: u64) -> EvalConfig {
    EvalConfig {
        seed,
        synthetic: SyntheticKbConfig {
            classes: 2,
            entities_per_class: 30,
            properties_per_class: 16,
            signature_properties: 6,
            min_properties: 7,
            ..SyntheticKbConfig::default()
        },
        train: 15,
        validation: 5,
        test: 5,
        gnn: GnnConfig { epochs: 8, batch_size: 256, ..GnnConfig::default() },
        ..EvalConfig::default()
    }
}
