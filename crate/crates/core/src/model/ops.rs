//! Single-node building blocks of the recommender.
//!
//! These evaluate one node or one pair at a time. Training and inference use
//! the batched engine, which computes the same quantities.

use ndarray::{s, Array1, ArrayView1};

use super::{AttentionActivation, ModelParams, Real};
use crate::error::{Error, Result};

/// `(E_U x_u, E_V[:, item])`.
pub fn base_embeddings<F: Real>(
    params: &ModelParams<F>,
    x_u: ArrayView1<'_, F>,
    item: usize,
) -> Result<(Array1<F>, Array1<F>)> {
    if x_u.len() != params.feature_width() {
        return Err(Error::Dimension(format!(
            "feature vector of length {} for d0 = {}",
            x_u.len(),
            params.feature_width()
        )));
    }
    if item >= params.num_items() {
        return Err(Error::Validation(format!(
            "item {item} out of range ({} items)",
            params.num_items()
        )));
    }
    Ok((
        params.user_embedding.dot(&x_u),
        params.item_embedding.column(item).to_owned(),
    ))
}

/// Shared message MLP: two ReLU layers then a linear output.
pub fn message<F: Real>(z: ArrayView1<'_, F>, params: &ModelParams<F>) -> Array1<F> {
    let relu = |x: F| x.max(F::zero());
    let h1 = (params.mlp_weights[0].dot(&z) + &params.mlp_biases[0]).mapv(relu);
    let h2 = (params.mlp_weights[1].dot(&h1) + &params.mlp_biases[1]).mapv(relu);
    params.mlp_weights[2].dot(&h2) + &params.mlp_biases[2]
}

/// Softmax-normalized attention of `center` over `messages`.
pub fn attention_weights<F: Real>(
    messages: &[Array1<F>],
    center: ArrayView1<'_, F>,
    params: &ModelParams<F>,
    activation: AttentionActivation,
) -> Vec<F> {
    let d = params.dim();
    let w_msg = params.att_weight.slice(s![.., ..d]);
    let w_center = params.att_weight.slice(s![.., d..]);
    let center_part = w_center.dot(&center) + &params.att_bias;
    let scores: Vec<F> = messages
        .iter()
        .map(|m| {
            let hidden = (w_msg.dot(m) + &center_part).mapv(|x| activation.apply(x));
            params.att_vector.dot(&hidden) + params.att_offset[0]
        })
        .collect();
    softmax(&scores)
}

pub(crate) fn softmax<F: Real>(scores: &[F]) -> Vec<F> {
    let max = scores.iter().copied().fold(F::neg_infinity(), F::max);
    let exp: Vec<F> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: F = exp.iter().copied().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Refined embedding of a node from its base embedding and its neighbours'.
pub fn aggregate_node<F: Real>(
    center: ArrayView1<'_, F>,
    neighbors: &[Array1<F>],
    params: &ModelParams<F>,
    activation: AttentionActivation,
) -> Array1<F> {
    let mut messages = Vec::with_capacity(neighbors.len() + 1);
    messages.push(message(center, params));
    messages.extend(neighbors.iter().map(|z| message(z.view(), params)));
    let alpha = attention_weights(&messages, center, params, activation);
    let mut pooled = Array1::zeros(params.dim());
    for (a, m) in alpha.iter().zip(&messages) {
        pooled.scaled_add(*a, m);
    }
    (params.agg_weight.dot(&pooled) + &params.agg_bias).mapv(|x| x.max(F::zero()))
}

/// Clipped pair features `q` and score `h . q`.
pub fn score_pair<F: Real>(
    user: ArrayView1<'_, F>,
    item: ArrayView1<'_, F>,
    params: &ModelParams<F>,
) -> (Array1<F>, F) {
    let d = params.dim();
    let q = (params.score_weight.slice(s![.., ..d]).dot(&user)
        + params.score_weight.slice(s![.., d..]).dot(&item)
        + &params.score_bias)
        .mapv(|x| x.max(F::zero()).min(F::one()));
    let s = params.projection.dot(&q);
    (q, s)
}
