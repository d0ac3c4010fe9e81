//! Forward and backward passes of the attention GNN.
//!
//! Entity latent: `h_i = h_i^P + h_i^E + σ(W e_i + b)` where each
//! interaction term is `σ(W Σ_j c_ij x_j + b)` over a neighbour list with
//! softmax attention (or uniform) coefficients. Property latent:
//! `k_j = k_j^E + σ(W p_j + b)`. An empty neighbour list contributes zero.

use super::math::{axpy, dot, selu, selu_grad, sigmoid, softmax, Mat};
use super::params::{AttentionParams, GnnParams, Role};
use crate::graph::EntityPropertyGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Table {
    Entities,
    Properties,
}

fn table(params: &GnnParams, t: Table) -> &Mat {
    match t {
        Table::Entities => &params.entity_embeddings,
        Table::Properties => &params.property_embeddings,
    }
}

fn table_mut(params: &mut GnnParams, t: Table) -> &mut Mat {
    match t {
        Table::Entities => &mut params.entity_embeddings,
        Table::Properties => &mut params.property_embeddings,
    }
}

/// Intermediate values of one neighbour aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct AggTrace {
    pub neighbors: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// `W1 [x_j; c] + b1` per neighbour; empty when attention is off.
    pub attention_pre: Vec<Vec<f64>>,
    pub aggregate: Vec<f64>,
    pub pre_activation: Vec<f64>,
    pub output: Vec<f64>,
}

/// Intermediate values for one entity or property node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTrace {
    pub self_pre: Vec<f64>,
    pub self_output: Vec<f64>,
    /// Entity nodes: `[property interactions, entity interactions]`;
    /// property nodes: `[entity interactions]`.
    pub interactions: Vec<Option<AggTrace>>,
    pub latent: Vec<f64>,
}

/// MLP intermediates: `g[0] = h ⊙ k`, `g[t+1] = σ(pre[t])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTrace {
    pub g: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
    pub logit: f64,
    pub y: f64,
}

fn attention_scores(
    att: &AttentionParams,
    center: &[f64],
    neighbors: &[&[f64]],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d1 = center.len();
    let mut center_part = att.b1.clone();
    att.w1.matvec_cols_into(d1, center, &mut center_part);
    let mut scores = Vec::with_capacity(neighbors.len());
    let mut pres = Vec::with_capacity(neighbors.len());
    for x in neighbors {
        let mut r = center_part.clone();
        att.w1.matvec_cols_into(0, x, &mut r);
        let s = att
            .w2
            .iter()
            .zip(&r)
            .map(|(w, ri)| w * selu(*ri))
            .sum::<f64>()
            + att.b2;
        scores.push(s);
        pres.push(r);
    }
    (scores, pres)
}

/// Softmax-normalised attention weights of `neighbors` around `center`.
/// Returns an empty list for an empty neighbour list.
pub fn attention_coefficients(
    params: &GnnParams,
    role: Role,
    center: &[f64],
    neighbors: &[&[f64]],
) -> Vec<f64> {
    let (scores, _) = attention_scores(params.attention_for(role), center, neighbors);
    softmax(&scores)
}

fn aggregate(
    params: &GnnParams,
    attention: bool,
    role: Role,
    center: &[f64],
    source: Table,
    ids: &[usize],
) -> Option<AggTrace> {
    if ids.is_empty() {
        return None;
    }
    let rows = table(params, source);
    let xs: Vec<&[f64]> = ids.iter().map(|&j| rows.row(j)).collect();
    let (coefficients, attention_pre) = if attention {
        let (scores, pres) = attention_scores(params.attention_for(role), center, &xs);
        (softmax(&scores), pres)
    } else {
        (vec![1.0 / ids.len() as f64; ids.len()], Vec::new())
    };
    let mut agg = vec![0.0; center.len()];
    for (c, x) in coefficients.iter().zip(&xs) {
        axpy(*c, x, &mut agg);
    }
    let mut pre = params.agg_bias.clone();
    params.agg_weight.matvec_cols_into(0, &agg, &mut pre);
    let output = pre.iter().map(|&u| selu(u)).collect();
    Some(AggTrace {
        neighbors: ids.to_vec(),
        coefficients,
        attention_pre,
        aggregate: agg,
        pre_activation: pre,
        output,
    })
}

fn self_term(params: &GnnParams, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pre = params.agg_bias.clone();
    params.agg_weight.matvec_cols_into(0, x, &mut pre);
    let out = pre.iter().map(|&u| selu(u)).collect();
    (pre, out)
}

fn finish(self_pre: Vec<f64>, self_output: Vec<f64>, interactions: Vec<Option<AggTrace>>) -> NodeTrace {
    let mut latent = self_output.clone();
    for t in interactions.iter().flatten() {
        axpy(1.0, &t.output, &mut latent);
    }
    NodeTrace {
        self_pre,
        self_output,
        interactions,
        latent,
    }
}

pub fn entity_forward(
    graph: &EntityPropertyGraph,
    params: &GnnParams,
    attention: bool,
    i: usize,
) -> NodeTrace {
    let center = params.entity_embeddings.row(i);
    let via_props = aggregate(
        params,
        attention,
        Role::EntityProperty,
        center,
        Table::Properties,
        &graph.entity_properties[i],
    );
    let via_ents = aggregate(
        params,
        attention,
        Role::EntityEntity,
        center,
        Table::Entities,
        &graph.entity_neighbors[i],
    );
    let (pre, out) = self_term(params, center);
    finish(pre, out, vec![via_props, via_ents])
}

pub fn property_forward(
    graph: &EntityPropertyGraph,
    params: &GnnParams,
    attention: bool,
    j: usize,
) -> NodeTrace {
    let center = params.property_embeddings.row(j);
    let via_ents = aggregate(
        params,
        attention,
        Role::PropertyEntity,
        center,
        Table::Entities,
        &graph.property_entities[j],
    );
    let (pre, out) = self_term(params, center);
    finish(pre, out, vec![via_ents])
}

pub fn score_forward(params: &GnnParams, h: &[f64], k: &[f64]) -> ScoreTrace {
    let mut g = vec![h.iter().zip(k).map(|(a, b)| a * b).collect::<Vec<f64>>()];
    let mut pres = Vec::with_capacity(params.hidden.len());
    for layer in &params.hidden {
        let mut pre = layer.bias.clone();
        layer.weight.matvec_cols_into(0, g.last().unwrap(), &mut pre);
        g.push(pre.iter().map(|&u| selu(u)).collect());
        pres.push(pre);
    }
    let logit = dot(&params.out_weight, g.last().unwrap()) + params.out_bias;
    ScoreTrace {
        g,
        pre: pres,
        logit,
        y: sigmoid(logit),
    }
}

/// Probability that entity latent `h` has property latent `k`.
pub fn score(params: &GnnParams, h: &[f64], k: &[f64]) -> f64 {
    score_forward(params, h, k).y
}

/// Backpropagates `dlogit` through the MLP; returns `(dL/dh, dL/dk)`.
pub fn score_backward(
    params: &GnnParams,
    grads: &mut GnnParams,
    trace: &ScoreTrace,
    h: &[f64],
    k: &[f64],
    dlogit: f64,
) -> (Vec<f64>, Vec<f64>) {
    let last = trace.g.last().unwrap();
    axpy(dlogit, last, &mut grads.out_weight);
    grads.out_bias += dlogit;
    let mut dg: Vec<f64> = params.out_weight.iter().map(|w| w * dlogit).collect();
    for t in (0..params.hidden.len()).rev() {
        let dv: Vec<f64> = dg
            .iter()
            .zip(&trace.pre[t])
            .map(|(d, v)| d * selu_grad(*v))
            .collect();
        grads.hidden[t].weight.add_outer_cols(0, &dv, &trace.g[t]);
        axpy(1.0, &dv, &mut grads.hidden[t].bias);
        let mut prev = vec![0.0; trace.g[t].len()];
        params.hidden[t].weight.matvec_t_cols_into(0, &dv, &mut prev);
        dg = prev;
    }
    let dh = dg.iter().zip(k).map(|(d, b)| d * b).collect();
    let dk = dg.iter().zip(h).map(|(d, a)| d * a).collect();
    (dh, dk)
}

/// Backward through `σ(W x + b)`; returns dL/dx.
fn dense_backward(params: &GnnParams, grads: &mut GnnParams, x: &[f64], pre: &[f64], d_out: &[f64]) -> Vec<f64> {
    let du: Vec<f64> = d_out
        .iter()
        .zip(pre)
        .map(|(d, u)| d * selu_grad(*u))
        .collect();
    grads.agg_weight.add_outer_cols(0, &du, x);
    axpy(1.0, &du, &mut grads.agg_bias);
    let mut dx = vec![0.0; x.len()];
    params.agg_weight.matvec_t_cols_into(0, &du, &mut dx);
    dx
}

/// Backward through one aggregation. Neighbour gradients go straight into
/// `grads`; the gradient w.r.t. the centre embedding is returned.
fn aggregate_backward(
    params: &GnnParams,
    grads: &mut GnnParams,
    role: Role,
    center: &[f64],
    source: Table,
    trace: &AggTrace,
    d_out: &[f64],
) -> Vec<f64> {
    let d1 = center.len();
    let da = dense_backward(params, grads, &trace.aggregate, &trace.pre_activation, d_out);
    let rows = table(params, source);
    for (&j, &c) in trace.neighbors.iter().zip(&trace.coefficients) {
        axpy(c, &da, table_mut(grads, source).row_mut(j));
    }
    let mut d_center = vec![0.0; d1];
    if trace.attention_pre.is_empty() {
        return d_center;
    }
    let dcoef: Vec<f64> = trace.neighbors.iter().map(|&j| dot(&da, rows.row(j))).collect();
    let mean: f64 = dcoef.iter().zip(&trace.coefficients).map(|(d, c)| d * c).sum();
    let slot = role.slot(params.attention.len());
    let att = &params.attention[slot];
    for (n, &j) in trace.neighbors.iter().enumerate() {
        let ds = trace.coefficients[n] * (dcoef[n] - mean);
        if ds == 0.0 {
            continue;
        }
        let r = &trace.attention_pre[n];
        let x = rows.row(j);
        let g_att = &mut grads.attention[slot];
        for (gw, ri) in g_att.w2.iter_mut().zip(r) {
            *gw += ds * selu(*ri);
        }
        g_att.b2 += ds;
        let dr: Vec<f64> = att
            .w2
            .iter()
            .zip(r)
            .map(|(w, ri)| ds * w * selu_grad(*ri))
            .collect();
        g_att.w1.add_outer_cols(0, &dr, x);
        g_att.w1.add_outer_cols(d1, &dr, center);
        axpy(1.0, &dr, &mut g_att.b1);
        let mut dx = vec![0.0; d1];
        att.w1.matvec_t_cols_into(0, &dr, &mut dx);
        axpy(1.0, &dx, table_mut(grads, source).row_mut(j));
        att.w1.matvec_t_cols_into(d1, &dr, &mut d_center);
    }
    d_center
}

pub fn entity_backward(
    params: &GnnParams,
    grads: &mut GnnParams,
    i: usize,
    trace: &NodeTrace,
    dh: &[f64],
) {
    let center = params.entity_embeddings.row(i);
    let mut de = dense_backward(params, grads, center, &trace.self_pre, dh);
    let roles = [
        (Role::EntityProperty, Table::Properties),
        (Role::EntityEntity, Table::Entities),
    ];
    for (t, (role, source)) in trace.interactions.iter().zip(roles) {
        if let Some(t) = t {
            let dc = aggregate_backward(params, grads, role, center, source, t, dh);
            axpy(1.0, &dc, &mut de);
        }
    }
    axpy(1.0, &de, grads.entity_embeddings.row_mut(i));
}

pub fn property_backward(
    params: &GnnParams,
    grads: &mut GnnParams,
    j: usize,
    trace: &NodeTrace,
    dk: &[f64],
) {
    let center = params.property_embeddings.row(j);
    let mut dp = dense_backward(params, grads, center, &trace.self_pre, dk);
    if let Some(t) = &trace.interactions[0] {
        let dc = aggregate_backward(params, grads, Role::PropertyEntity, center, Table::Entities, t, dk);
        axpy(1.0, &dc, &mut dp);
    }
    axpy(1.0, &dp, grads.property_embeddings.row_mut(j));
}
