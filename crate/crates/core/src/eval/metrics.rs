use std::collections::BTreeSet;
use std::hash::Hash;

/// |top-m ∩ relevant| / m.
pub fn precision_at_m<T: Ord>(ranked: &[T], relevant: &BTreeSet<T>, m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let hits = ranked.iter().take(m).filter(|x| relevant.contains(x)).count();
    hits as f64 / m as f64
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// Binary-relevance NDCG with a log2 discount; the ideal DCG places
/// min(m, |relevant|) hits at the top.
pub fn ndcg_at_m<T: Ord>(ranked: &[T], relevant: &BTreeSet<T>, m: usize) -> f64 {
    if relevant.is_empty() || m == 0 {
        return 0.0;
    }
    let dcg: f64 = ranked
        .iter()
        .take(m)
        .enumerate()
        .filter(|(_, x)| relevant.contains(x))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let ideal: f64 = (1..=m.min(relevant.len())).map(discount).sum();
    dcg / ideal
}

/// Mean of the precision at each relevant hit, over |relevant|.
pub fn average_precision<T: Ord>(ranked: &[T], relevant: &BTreeSet<T>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, x) in ranked.iter().enumerate() {
        if relevant.contains(x) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

/// Mean average precision over (ranking, relevant set) pairs.
pub fn mean_average_precision<T: Ord>(results: &[(Vec<T>, BTreeSet<T>)]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results
        .iter()
        .map(|(r, rel)| average_precision(r, rel))
        .sum::<f64>()
        / results.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Set-based precision, recall and F1; each is 0 when its denominator is.
pub fn fact_prf<T: Ord + Hash>(predicted: &BTreeSet<T>, gold: &BTreeSet<T>) -> Prf {
    let tp = predicted.intersection(gold).count() as f64;
    let precision = if predicted.is_empty() {
        0.0
    } else {
        tp / predicted.len() as f64
    };
    let recall = if gold.is_empty() {
        0.0
    } else {
        tp / gold.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
    }
}
