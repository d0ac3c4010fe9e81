use std::collections::{BTreeMap, BTreeSet};

use kbenrich_core::kb::{FactKey, Value};
use kbenrich_core::source_sim::*;
use kbenrich_core::truth::majority_labels;
use proptest::prelude::*;

fn world(seed: u64, n_facts: usize, n_sources: usize, variance: (f64, f64)) -> World {
    generate_world(&WorldConfig {
        n_facts,
        sources: SourceConfig { n_sources, powerlaw_exponent: 2.0, variance_range: variance, seed },
        ..WorldConfig::default()
    })
    .unwrap()
}

/// Tail shape averaged over seeds; single draws of 200 sources scatter
/// around the thresholds.
#[test]
fn claim_counts_have_a_long_tail() {
    let seeds = 20;
    let (mut small_sum, mut top_sum) = (0.0, 0.0);
    for seed in 0..seeds {
        let w = world(seed, 200, 200, (0.01, 0.25));
        let mut counts: Vec<usize> = w.sources.iter().map(|s| s.claim_count).collect();
        counts.sort_unstable_by(|a, b| b.cmp(a));
        let total: usize = counts.iter().sum();
        assert_eq!(total, w.claims.len());
        small_sum += counts.iter().filter(|&&c| c <= 3).count() as f64 / counts.len() as f64;
        top_sum += counts[..counts.len() / 20].iter().sum::<usize>() as f64 / total as f64;
    }
    let (small, top) = (small_sum / seeds as f64, top_sum / seeds as f64);
    assert!(small >= 0.6, "{small} of sources have at most 3 claims");
    assert!(top >= 0.4, "top 5% hold {top}");
}

#[test]
fn zeta_sampler_matches_its_probabilities() {
    use rand::SeedableRng;
    let zeta = TruncatedZeta::new(2.0, 50).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let draws = 100_000;
    let mut hist = [0usize; 51];
    for _ in 0..draws {
        hist[rand::distr::Distribution::sample(&zeta, &mut rng)] += 1;
    }
    assert_eq!(hist[0], 0);
    for k in 1..=5 {
        let p = zeta.probability(k);
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((hist[k] as f64 - draws as f64 * p).abs() < 4.0 * sd, "k={k}");
    }
    let total: f64 = (1..=50).map(|k| zeta.probability(k)).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(TruncatedZeta::new(1.0, 10).is_err());
}

#[test]
fn zero_noise_reproduces_planted_truths() {
    let w = world(4, 150, 30, (1e-14, 1e-14));
    for c in &w.claims {
        let z = if w.truths[&c.fact] { 1.0 } else { 0.0 };
        assert!((c.observation - z).abs() < 1e-5);
    }
}

#[test]
fn same_seed_same_world() {
    assert_eq!(world(9, 120, 40, (0.01, 0.25)), world(9, 120, 40, (0.01, 0.25)));
    assert_ne!(world(9, 120, 40, (0.01, 0.25)).claims, world(10, 120, 40, (0.01, 0.25)).claims);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = |sources: SourceConfig| generate_world(&WorldConfig { sources, ..WorldConfig::default() }).is_err();
    assert!(bad(SourceConfig { powerlaw_exponent: 1.0, ..SourceConfig::default() }));
    assert!(bad(SourceConfig { variance_range: (0.0, 0.2), ..SourceConfig::default() }));
    assert!(bad(SourceConfig { variance_range: (0.3, 0.2), ..SourceConfig::default() }));
    assert!(bad(SourceConfig { variance_range: (0.1, 1.5), ..SourceConfig::default() }));
    assert!(bad(SourceConfig { n_sources: 0, ..SourceConfig::default() }));
}

fn fk(e: &str, v: &str) -> FactKey {
    FactKey::new(e, "p", Value::literal(v))
}

fn c(e: &str, v: &str, s: &str, o: f64) -> Claim {
    Claim { fact: fk(e, v), source: s.into(), observation: o }
}

#[test]
fn merge_matches_union_oracle() {
    let a = vec![c("e1", "x", "s1", 0.4), c("e1", "y", "s2", 0.8)];
    let b = vec![c("e1", "x", "s1", 0.9), c("e2", "z", "s3", 0.1), c("e1", "x", "s2", 0.2)];
    let d = vec![c("e2", "z", "s3", 0.05), c("e3", "w", "s1", 1.0)];
    let merged = merge_claims([a.clone(), b.clone(), d.clone()]);

    let mut oracle: BTreeMap<(FactKey, String), f64> = BTreeMap::new();
    for cl in a.iter().chain(&b).chain(&d) {
        let e = oracle.entry((cl.fact.clone(), cl.source.clone())).or_insert(f64::MIN);
        *e = e.max(cl.observation);
    }
    assert_eq!(merged.len(), oracle.len());
    for m in &merged {
        assert_eq!(oracle[&(m.fact.clone(), m.source.clone())], m.observation);
    }
    let facts: BTreeSet<_> = merged.iter().map(|m| m.fact.clone()).collect();
    let union: BTreeSet<_> = a.iter().chain(&b).chain(&d).map(|m| m.fact.clone()).collect();
    assert_eq!(facts, union);
    // fact e1/x keeps one claim per source.
    assert_eq!(merged.iter().filter(|m| m.fact == fk("e1", "x")).count(), 2);

    let disjoint = merge_claims([vec![c("a", "1", "s", 0.3)], vec![c("b", "2", "s", 0.6)]]);
    assert_eq!(disjoint.len(), 2);
}

#[test]
fn extractors_split_claims_by_source_type() {
    let w = world(2, 100, 30, (0.01, 0.25));
    let extractors = SimulatedExtractor::all(&w);
    let mut seen = Vec::new();
    let pairs: BTreeSet<(String, String)> =
        w.claims.iter().map(|c| (c.fact.subject.clone(), c.fact.property.clone())).collect();
    for (e, p) in &pairs {
        for x in &extractors {
            seen.extend(x.extract(e, p));
        }
    }
    assert_eq!(merge_claims([seen]), merge_claims([w.claims.clone()]));
    let names: BTreeSet<String> = extractors.iter().map(|x| x.descriptor().name).collect();
    assert_eq!(names.len(), 3);
}

#[test]
fn world_files_round_trip() {
    let w = world(6, 80, 20, (0.01, 0.25));
    let dir = tempfile::tempdir().unwrap();
    save_world(&w, dir.path()).unwrap();
    assert_eq!(read_claims(dir.path().join(CLAIMS_FILE)).unwrap(), w.claims);
    assert_eq!(read_sources(dir.path().join(SOURCES_FILE)).unwrap(), w.sources);
    let truths: BTreeMap<FactKey, bool> = read_facts(dir.path().join(TRUTHS_FILE))
        .unwrap()
        .into_iter()
        .map(|(f, t)| (f, t.unwrap()))
        .collect();
    assert_eq!(truths, w.truths);
    let prior: BTreeSet<FactKey> = read_facts(dir.path().join(PRIOR_FILE)).unwrap().into_iter().map(|(f, _)| f).collect();
    assert_eq!(prior, w.prior_truths);
    // Claims never carry the planted truth.
    let text = std::fs::read_to_string(dir.path().join(CLAIMS_FILE)).unwrap();
    assert!(!text.contains("truth"));
}

#[test]
fn malformed_files_report_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("claims.jsonl");
    std::fs::write(&p, "{\"entity\":\"e\",\"property\":\"p\",\"value\":\"v\",\"kind\":\"literal\",\"source\":\"s\",\"observation\":1.5}\n").unwrap();
    assert!(matches!(read_claims(&p), Err(kbenrich_core::Error::Parse { line: 1, .. })));
    let s = dir.path().join("sources.tsv");
    std::fs::write(&s, "source\ttype\ttrue_error_variance\tclaims\ns0\tradio\t0.1\t3\n").unwrap();
    assert!(matches!(read_sources(&s), Err(kbenrich_core::Error::Parse { line: 2, .. })));
}

#[test]
fn majority_accuracy_grows_with_more_sources() {
    let accuracy = |n_sources: usize| -> f64 {
        let mut total = 0.0;
        for seed in 0..20 {
            let w = world(seed, 100, n_sources, (0.15, 0.15));
            let predicted = majority_labels(&w.claims, 0.5).unwrap();
            let right = w.truths.iter().filter(|(f, t)| predicted.contains(*f) == **t).count();
            total += right as f64 / w.truths.len() as f64;
        }
        total / 20.0
    };
    let acc: Vec<f64> = [10, 50, 250].into_iter().map(accuracy).collect();
    assert!(acc[0] < acc[1] && acc[1] < acc[2], "{acc:?}");
}

proptest! {
    #[test]
    fn claims_are_well_formed(seed in any::<u64>(), n_facts in 1usize..120, n_sources in 1usize..60, hi in 0.01f64..1.0) {
        let w = world(seed, n_facts, n_sources, (0.01f64.min(hi), hi));
        let ids: BTreeSet<&str> = w.sources.iter().map(|s| s.id.as_str()).collect();
        let mut pairs = BTreeSet::new();
        for c in &w.claims {
            prop_assert!(w.truths.contains_key(&c.fact));
            prop_assert!(ids.contains(c.source.as_str()));
            prop_assert!((0.0..=1.0).contains(&c.observation));
            prop_assert!(pairs.insert((c.fact.clone(), c.source.clone())));
        }
        prop_assert_eq!(w.truths.len(), n_facts);
        let claimed: BTreeSet<&FactKey> = w.claims.iter().map(|c| &c.fact).collect();
        prop_assert_eq!(claimed.len(), n_facts);
        prop_assert!(w.prior_truths.iter().all(|f| w.truths[f]));
        prop_assert!(w.sources.iter().all(|s| s.true_error_variance > 0.0));
    }
}
