use kbenrich_core::graph::{build_graph, EntityPropertyGraph, GraphOptions};
use kbenrich_core::kb::{Fact, KnowledgeBase, Value, TYPE_PROPERTY};
use kbenrich_core::similarity::{top_k_neighbors, CorpusStats};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_kb(seed: u64, n: usize) -> KnowledgeBase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut facts = Vec::new();
    for i in 0..n {
        let e = format!("e{i:02}");
        facts.push(Fact::new(&e, TYPE_PROPERTY, Value::class(format!("T{}", rng.random_range(0..3)))));
        for p in 0..10 {
            if rng.random_bool(0.4) {
                facts.push(Fact::new(&e, format!("p{p}"), Value::literal(format!("v{}", rng.random_range(0..4)))));
            }
        }
    }
    KnowledgeBase::from_facts(facts)
}

#[test]
fn neighbor_lists_equal_brute_force_top_k() {
    let kb = random_kb(7, 20);
    let opts = GraphOptions { k: 5, ..GraphOptions::default() };
    let g = build_graph(&kb, &opts).unwrap();
    let stats = CorpusStats::from_kb(&kb);
    for (i, e) in g.entity_ids.iter().enumerate() {
        let expected: Vec<&str> = top_k_neighbors(&kb, &stats, &opts.weights, e, 5)
            .unwrap()
            .into_iter()
            .map(|(o, _)| g.entity_ids[g.entity_index(&o).unwrap()].as_str())
            .collect();
        let got: Vec<&str> = g.entity_neighbors[i].iter().map(|&j| g.entity_ids[j].as_str()).collect();
        assert_eq!(got, expected);
    }
}

#[test]
fn node_order_is_sorted_ids() {
    let kb = random_kb(3, 12);
    let g = build_graph(&kb, &GraphOptions::default()).unwrap();
    assert!(g.entity_ids.windows(2).all(|w| w[0] < w[1]));
    assert!(g.property_ids.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn empty_kb_and_zero_k_are_rejected() {
    assert!(build_graph(&KnowledgeBase::default(), &GraphOptions::default()).is_err());
    let kb = random_kb(0, 3);
    assert!(build_graph(&kb, &GraphOptions { k: 0, ..GraphOptions::default() }).is_err());
}

#[test]
fn tampered_json_fails_consistency() {
    let kb = random_kb(1, 6);
    let mut g = build_graph(&kb, &GraphOptions::default()).unwrap();
    let j = (0..g.n_properties()).find(|&j| !g.uses(0, j)).unwrap();
    g.entity_properties[0].push(j);
    g.entity_properties[0].sort_unstable();
    let json = serde_json::to_string(&g).unwrap();
    assert!(EntityPropertyGraph::from_json(&json).is_err());
}

proptest! {
    #[test]
    fn usage_edges_match_kb_both_ways(seed in 0u64..1000, n in 1usize..15, k in 1usize..6) {
        let kb = random_kb(seed, n);
        let g = build_graph(&kb, &GraphOptions { k, ..GraphOptions::default() }).unwrap();
        g.check_consistency().unwrap();
        for (i, e) in g.entity_ids.iter().enumerate() {
            for (j, p) in g.property_ids.iter().enumerate() {
                let used = kb.properties_of(e).is_some_and(|s| s.contains(p));
                prop_assert_eq!(g.uses(i, j), used);
                prop_assert_eq!(g.property_entities[j].contains(&i), used);
            }
            prop_assert!(g.entity_neighbors[i].len() <= k);
            prop_assert!(!g.entity_neighbors[i].contains(&i));
        }
    }

    #[test]
    fn rebuild_is_byte_identical(seed in 0u64..1000, n in 1usize..12) {
        let kb = random_kb(seed, n);
        let opts = GraphOptions { k: 4, ..GraphOptions::default() };
        let a = build_graph(&kb, &opts).unwrap().to_canonical_json().unwrap();
        let b = build_graph(&kb, &opts).unwrap().to_canonical_json().unwrap();
        prop_assert_eq!(&a, &b);
        let back = EntityPropertyGraph::from_json(&a).unwrap();
        prop_assert_eq!(back.to_canonical_json().unwrap(), a);
    }

    #[test]
    fn symmetrized_edges_contain_reverse(seed in 0u64..1000, n in 2usize..12) {
        let kb = random_kb(seed, n);
        let g = build_graph(&kb, &GraphOptions { k: 2, symmetrize_ee: true, ..GraphOptions::default() }).unwrap();
        let directed = build_graph(&kb, &GraphOptions { k: 2, ..GraphOptions::default() }).unwrap();
        for (i, ns) in directed.entity_neighbors.iter().enumerate() {
            for &j in ns {
                prop_assert!(g.entity_neighbors[i].contains(&j));
                prop_assert!(g.entity_neighbors[j].contains(&i));
            }
        }
    }
}
