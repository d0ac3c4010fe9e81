use kbenrich_core::gnn::*;
use kbenrich_core::graph::{build_graph, EntityPropertyGraph, GraphOptions};
use kbenrich_core::kb::{Fact, KnowledgeBase, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tiny_graph(seed: u64) -> EntityPropertyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut facts = Vec::new();
    for e in 0..6 {
        for p in 0..5 {
            if rng.random_bool(0.5) || p == e % 5 {
                facts.push(Fact::new(format!("e{e}"), format!("p{p}"), Value::literal(format!("v{}", rng.random_range(0..3)))));
            }
        }
    }
    let kb = KnowledgeBase::from_facts(facts);
    build_graph(&kb, &GraphOptions { k: 2, ..Default::default() }).unwrap()
}

/// Relative error ‖a − b‖ / max(‖a‖ + ‖b‖, floor) per parameter group.
pub fn check_gradients(seed: u64, per_role: bool, attention: bool) -> Vec<(String, f64)> {
    let graph = tiny_graph(seed);
    let cfg = GnnConfig {
        dim: 4,
        attention_dim: 3,
        hidden_layers: 2,
        init_std: 0.5,
        seed,
        per_role_attention: per_role,
        ..Default::default()
    };
    let params = GnnParams::init(graph.n_entities(), graph.n_properties(), &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    let batch: Vec<Example> = (0..12)
        .map(|_| {
            Example::new(
                rng.random_range(0..graph.n_entities()),
                rng.random_range(0..graph.n_properties()),
                if rng.random_bool(0.5) { 1.0 } else { 0.0 },
            )
        })
        .collect();
    let (_, grads) = loss_and_grad(&graph, &params, attention, &batch);
    let analytic: Vec<(String, Vec<f64>)> = grads.tensors().into_iter().map(|(n, t)| (n, t.to_vec())).collect();
    let step = 1e-5;
    let mut out = Vec::new();
    for (g, (name, a)) in analytic.iter().enumerate() {
        let mut fd = vec![0.0; a.len()];
        for idx in 0..a.len() {
            let mut plus = params.clone();
            plus.tensors_mut()[g].1[idx] += step;
            let mut minus = params.clone();
            minus.tensors_mut()[g].1[idx] -= step;
            fd[idx] = (loss(&graph, &plus, attention, &batch) - loss(&graph, &minus, attention, &batch)) / (2.0 * step);
        }
        let diff: f64 = a.iter().zip(&fd).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + fd.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.push((name.clone(), diff / scale.max(1e-6)));
    }
    out
}

