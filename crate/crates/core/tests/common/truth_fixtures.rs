use kbenrich_core::kb::{FactKey, Value};
use kbenrich_core::source_sim::Claim;
use kbenrich_core::truth::{negative_log_likelihood, nll_gradient, ClaimSet, SourceStats};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fact(i: usize) -> FactKey {
    FactKey::new("e", format!("p{}", i / 3), Value::literal(format!("v{i}")))
}

/// Random claims over `n_facts` facts and `n_sources` sources. Every fact
/// and every source gets at least one claim.
pub fn random_claims(rng: &mut ChaCha8Rng, n_facts: usize, n_sources: usize) -> Vec<Claim> {
    let mut pairs = std::collections::BTreeSet::new();
    for f in 0..n_facts {
        pairs.insert((f, rng.random_range(0..n_sources)));
    }
    for s in 0..n_sources {
        pairs.insert((rng.random_range(0..n_facts), s));
    }
    for f in 0..n_facts {
        for s in 0..n_sources {
            if rng.random_bool(0.4) {
                pairs.insert((f, s));
            }
        }
    }
    pairs
        .into_iter()
        .map(|(f, s)| Claim {
            fact: fact(f),
            source: format!("s{s}"),
            observation: rng.random_range(0.0..=1.0),
        })
        .collect()
}

pub fn random_stats(rng: &mut ChaCha8Rng, set: &ClaimSet) -> Vec<SourceStats> {
    (0..set.n_sources())
        .map(|s| SourceStats {
            nu: rng.random_range(0.5..4.0),
            tau2: rng.random_range(0.01..0.3),
            claims: set.by_source[s].len(),
        })
        .collect()
}

pub struct Instance {
    pub set: ClaimSet,
    pub stats: Vec<SourceStats>,
    pub beta: (f64, f64),
}

pub fn random_instance(seed: u64, n_facts: usize, n_sources: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let set = ClaimSet::new(&random_claims(&mut rng, n_facts, n_sources)).unwrap();
    let stats = random_stats(&mut rng, &set);
    let beta = (rng.random_range(1.5..6.0), rng.random_range(1.5..6.0));
    Instance { set, stats, beta }
}

/// ‖analytic − central difference‖ / (‖analytic‖ + ‖fd‖) at a random interior point.
pub fn nll_gradient_error(seed: u64) -> f64 {
    let inst = random_instance(seed, 5, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let z: Vec<f64> = (0..inst.set.n_facts()).map(|_| rng.random_range(0.05..0.95)).collect();
    let f = |z: &[f64]| negative_log_likelihood(z, &inst.set, &inst.stats, inst.beta).unwrap();
    let analytic = nll_gradient(&z, &inst.set, &inst.stats, inst.beta).unwrap();
    let step = 1e-5;
    let fd: Vec<f64> = (0..z.len())
        .map(|i| {
            let mut plus = z.clone();
            plus[i] += step;
            let mut minus = z.clone();
            minus[i] -= step;
            (f(&plus) - f(&minus)) / (2.0 * step)
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&fd).map(|(a, b)| a - b).collect();
    norm(&diff) / (norm(&analytic) + norm(&fd)).max(1e-12)
}

/// Global minimiser of the objective over a one- or two-dimensional grid:
/// a 1e-3 sweep of (0, 1) refined by a 1e-5 sweep around the best point.
pub fn grid_minimum(inst: &Instance) -> Vec<f64> {
    let n = inst.set.n_facts();
    assert!((1..=2).contains(&n));
    let f = |z: &[f64]| negative_log_likelihood(z, &inst.set, &inst.stats, inst.beta).unwrap();
    let sweep = |lo: &[f64], hi: &[f64], step: f64| -> Vec<f64> {
        let axis = |d: usize| -> Vec<f64> {
            let count = ((hi[d] - lo[d]) / step).round() as usize;
            (0..=count).map(|i| (lo[d] + i as f64 * step).clamp(1e-6, 1.0 - 1e-6)).collect()
        };
        let mut best = (f64::INFINITY, vec![]);
        let xs = axis(0);
        let ys = if n == 2 { axis(1) } else { vec![0.0] };
        for &x in &xs {
            for &y in &ys {
                let z = if n == 2 { vec![x, y] } else { vec![x] };
                let v = f(&z);
                if v < best.0 {
                    best = (v, z);
                }
            }
        }
        best.1
    };
    let coarse = sweep(&vec![0.0005; n], &vec![0.9995; n], 1e-3);
    let lo: Vec<f64> = coarse.iter().map(|z| (z - 2e-3).max(1e-6)).collect();
    let hi: Vec<f64> = coarse.iter().map(|z| (z + 2e-3).min(1.0 - 1e-6)).collect();
    sweep(&lo, &hi, 1e-5)
}
