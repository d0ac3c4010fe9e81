use serde::{Deserialize, Serialize};

use super::model::{
    clamp_truth, curvature_unchecked, grad_unchecked, majority_init, nll_unchecked, set_hyperparameters, source_reliability,
    ClaimSet, SourceStats, TruthConfig, DELTA,
};
use crate::error::Result;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const CURVATURE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial point.
    pub objective_trace: Vec<f64>,
}

fn logit(z: f64) -> f64 {
    (z / (1.0 - z)).ln()
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Starting point: majority vote where a fact has claims, 0.5 otherwise.
pub fn initial_truths(set: &ClaimSet) -> Vec<f64> {
    (0..set.n_facts())
        .map(|f| {
            let cs = &set.by_fact[f];
            if cs.is_empty() {
                0.5
            } else {
                clamp_truth(cs.iter().map(|&c| set.claims[c].observation).sum::<f64>() / cs.len() as f64)
            }
        })
        .collect()
}

/// Minimizes the negative log likelihood from the majority-vote start.
pub fn infer_truths(set: &ClaimSet, stats: &[SourceStats], cfg: &TruthConfig) -> Result<Inference> {
    let fixed = vec![false; set.n_facts()];
    infer_truths_from(set, stats, cfg, &initial_truths(set), &fixed)
}

/// Diagonally preconditioned projected descent on u = logit(z) with a
/// backtracking Armijo line search. Facts flagged in `fixed` stay at their initial value;
/// u is confined to [logit(δ), logit(1 − δ)].
pub fn infer_truths_from(
    set: &ClaimSet,
    stats: &[SourceStats],
    cfg: &TruthConfig,
    init: &[f64],
    fixed: &[bool],
) -> Result<Inference> {
    cfg.validate()?;
    let bound = logit(1.0 - DELTA);
    let mut u: Vec<f64> = init.iter().map(|&z| logit(clamp_truth(z)).clamp(-bound, bound)).collect();
    let to_z = |u: &[f64]| -> Vec<f64> { u.iter().map(|&x| clamp_truth(sigmoid(x))).collect() };

    let mut z = to_z(&u);
    let mut f = nll_unchecked(&z, set, stats, cfg.beta);
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        let gz = grad_unchecked(&z, set, stats, cfg.beta);
        let hz = curvature_unchecked(&z, set, stats, cfg.beta);
        // Chain rule through the sigmoid, then zero out components that are
        // fixed or pinned at a bound and pushing outward.
        let mut g = vec![0.0; u.len()];
        let mut dir = vec![0.0; u.len()];
        for i in 0..u.len() {
            let dz = z[i] * (1.0 - z[i]);
            let gi = gz[i] * dz;
            let pinned = (u[i] >= bound && gi < 0.0) || (u[i] <= -bound && gi > 0.0);
            if fixed[i] || pinned {
                continue;
            }
            let hi = hz[i] * dz * dz + (gz[i] * dz * (1.0 - 2.0 * z[i])).abs();
            g[i] = gi;
            dir[i] = gi / hi.max(CURVATURE_FLOOR);
        }
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < cfg.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut t = cfg.step_size;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = u
                .iter()
                .zip(&dir)
                .map(|(&ui, &di)| (ui - t * di).clamp(-bound, bound))
                .collect();
            let decrease: f64 = u.iter().zip(&cand).zip(&g).map(|((a, b), gi)| gi * (a - b)).sum();
            let zc = to_z(&cand);
            let fc = nll_unchecked(&zc, set, stats, cfg.beta);
            if fc <= f - ARMIJO_C * decrease {
                u = cand;
                z = zc;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No representable decrease left along the search direction.
            break;
        }
        trace.push(f);
    }
    if !converged {
        log::debug!("truth inference stopped after {iterations} iterations without converging");
    }
    Ok(Inference {
        z,
        objective: f,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Everything the verifier produces for one claim set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub z: Vec<f64>,
    pub stats: Vec<SourceStats>,
    pub reliability: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Majority-vote start, hyperparameters, inference, then `refine_rounds`
/// passes that re-estimate the source variances from the inferred truths.
/// Prior truths are held at 1 − δ throughout when enabled.
pub fn run_inference(set: &ClaimSet, prior: &[bool], cfg: &TruthConfig) -> Result<Verification> {
    cfg.validate()?;
    let use_prior = cfg.use_prior_truths;
    let fixed: Vec<bool> = prior.iter().map(|&p| p && use_prior).collect();
    let mut z = majority_init(set)?;
    for (zi, &fx) in z.iter_mut().zip(&fixed) {
        if fx {
            *zi = 1.0 - DELTA;
        }
    }
    let mut stats = set_hyperparameters(set, &z, prior, cfg)?;
    let mut inf = infer_truths_from(set, &stats, cfg, &z, &fixed)?;
    let mut iterations = inf.iterations;
    for _ in 0..cfg.refine_rounds {
        stats = set_hyperparameters(set, &inf.z, prior, cfg)?;
        inf = infer_truths_from(set, &stats, cfg, &inf.z, &fixed)?;
        iterations += inf.iterations;
    }
    Ok(Verification {
        reliability: source_reliability(set, &stats, &inf.z),
        z: inf.z,
        stats,
        objective: inf.objective,
        iterations,
        converged: inf.converged,
    })
}
