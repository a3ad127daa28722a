//! Batched forward and backward passes.
//!
//! A [`Plan`] lists the centre nodes whose refined embeddings are needed and
//! the message nodes feeding them. Messages are computed once per message
//! node, so a node shared by several centres costs one MLP evaluation.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::index::sample as sample_indices;
use rand::Rng;

use super::{AttentionActivation, ModelParams, Real, TrainingTriple};
use crate::data::BipartiteGraph;
use crate::error::{Error, Result};
use crate::fm::{
    bpr_term, bpr_term_grad, truncated_bpr_approx, truncated_bpr_grad, NoisePolynomial,
};

const NO_ROW: usize = usize::MAX;

/// Which training objective a step minimizes.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// `sum -ln sigmoid(s_pos - s_neg)`.
    Bpr,
    /// Truncated Taylor loss plus the noise polynomial in `h`, weighted by
    /// `batch / dataset_size`.
    Perturbed {
        noise: &'a NoisePolynomial,
        dataset_size: usize,
    },
}

/// Message nodes and centre nodes of one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub msg_users: Vec<usize>,
    pub msg_items: Vec<usize>,
    pub user_centers: Vec<usize>,
    /// Message row of each centre's own node; user centres first.
    pub center_rows: Vec<usize>,
    /// Edge range of centre `c` is `edge_offsets[c]..edge_offsets[c + 1]`.
    pub edge_offsets: Vec<usize>,
    /// Message row feeding each edge; the first edge of every centre is its self-message.
    pub edge_rows: Vec<usize>,
}

impl Plan {
    pub fn num_centers(&self) -> usize {
        self.center_rows.len()
    }

    pub fn num_messages(&self) -> usize {
        self.msg_users.len() + self.msg_items.len()
    }

    /// Builds a plan for sorted, deduplicated centre lists. Neighbour lists
    /// longer than `cap` are subsampled uniformly with `rng`.
    pub fn build<R: Rng + ?Sized>(
        graph: &BipartiteGraph,
        user_centers: Vec<usize>,
        item_centers: Vec<usize>,
        cap: Option<usize>,
        rng: &mut R,
    ) -> Plan {
        let mut user_slot = vec![NO_ROW; graph.num_users];
        let mut item_slot = vec![NO_ROW; graph.num_items];
        let mut msg_users = Vec::new();
        let mut msg_items = Vec::new();
        let mut take_user = |u: usize, msg_users: &mut Vec<usize>| {
            if user_slot[u] == NO_ROW {
                user_slot[u] = msg_users.len();
                msg_users.push(u);
            }
            user_slot[u]
        };
        let mut take_item = |v: usize, msg_items: &mut Vec<usize>| {
            if item_slot[v] == NO_ROW {
                item_slot[v] = msg_items.len();
                msg_items.push(v);
            }
            item_slot[v]
        };

        let pick = |all: &[usize], rng: &mut R| -> Vec<usize> {
            match cap {
                Some(k) if all.len() > k => {
                    let mut chosen: Vec<usize> = sample_indices(rng, all.len(), k)
                        .into_iter()
                        .map(|i| all[i])
                        .collect();
                    chosen.sort_unstable();
                    chosen
                }
                _ => all.to_vec(),
            }
        };

        // (is_item, local slot) per edge, resolved to global rows at the end
        let mut edges: Vec<(bool, usize)> = Vec::new();
        let mut edge_offsets = vec![0];
        let mut centers: Vec<(bool, usize)> = Vec::new();
        for &u in &user_centers {
            let own = take_user(u, &mut msg_users);
            centers.push((false, own));
            edges.push((false, own));
            for v in pick(graph.user_neighbors(u), rng) {
                edges.push((true, take_item(v, &mut msg_items)));
            }
            edge_offsets.push(edges.len());
        }
        for &v in &item_centers {
            let own = take_item(v, &mut msg_items);
            centers.push((true, own));
            edges.push((true, own));
            for u in pick(graph.item_neighbors(v), rng) {
                edges.push((false, take_user(u, &mut msg_users)));
            }
            edge_offsets.push(edges.len());
        }
        let n_u = msg_users.len();
        let row = |(is_item, slot): (bool, usize)| if is_item { n_u + slot } else { slot };
        Plan {
            msg_users,
            msg_items,
            user_centers,
            center_rows: centers.into_iter().map(row).collect(),
            edge_offsets,
            edge_rows: edges.into_iter().map(row).collect(),
        }
    }
}

/// Intermediate values of a forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct Forward<F> {
    pub plan: Plan,
    pub x_users: Array2<F>,
    /// Base embeddings of message nodes.
    pub z: Array2<F>,
    pub h1: Array2<F>,
    pub h2: Array2<F>,
    /// Messages.
    pub m: Array2<F>,
    /// Message half of the attention hidden layer.
    pub p: Array2<F>,
    /// Centre half of the attention hidden layer, bias included.
    pub cc: Array2<F>,
    pub alpha: Vec<F>,
    pub agg: Array2<F>,
    /// Refined embeddings per centre.
    pub zs: Array2<F>,
}

/// Dot product with eight independent partial sums.
#[inline]
fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    let mut acc = [F::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: F = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(&x, &y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().copied().sum::<F>() + tail
}

/// Attention hidden layer of one edge, `act(p + cc)`, written into `out`.
#[inline]
fn attention_hidden<F: Real>(act: AttentionActivation, p: &[F], cc: &[F], out: &mut [F]) {
    for ((y, &a), &b) in out.iter_mut().zip(p).zip(cc) {
        *y = a + b;
    }
    act.apply_slice(out);
}

/// `y += alpha * x`.
#[inline]
fn axpy<F: Real>(alpha: F, x: &[F], y: &mut [F]) {
    for (t, &v) in y.iter_mut().zip(x) {
        *t += alpha * v;
    }
}

#[inline]
fn add_to<F: Real>(x: &[F], y: &mut [F]) {
    for (t, &v) in y.iter_mut().zip(x) {
        *t += v;
    }
}

fn relu<F: Real>(x: F) -> F {
    if x > F::zero() {
        x
    } else {
        F::zero()
    }
}

fn add_row_bias<F: Real>(a: &mut Array2<F>, b: &Array1<F>) {
    for mut row in a.rows_mut() {
        row += b;
    }
}

pub(crate) fn forward<F: Real>(
    params: &ModelParams<F>,
    features: ArrayView2<'_, F>,
    activation: AttentionActivation,
    plan: Plan,
) -> Forward<F> {
    let d = params.dim();
    let x_users = features.select(Axis(0), &plan.msg_users);
    let mut z = Array2::zeros((plan.num_messages(), d));
    let n_u = plan.msg_users.len();
    z.slice_mut(s![..n_u, ..])
        .assign(&x_users.dot(&params.user_embedding.t()));
    for (k, &v) in plan.msg_items.iter().enumerate() {
        z.row_mut(n_u + k).assign(&params.item_embedding.column(v));
    }

    let [w0, w1, w2] = &params.mlp_weights;
    let [b0, b1, b2] = &params.mlp_biases;
    let mut h1 = z.dot(&w0.t());
    add_row_bias(&mut h1, b0);
    h1.mapv_inplace(relu);
    let mut h2 = h1.dot(&w1.t());
    add_row_bias(&mut h2, b1);
    h2.mapv_inplace(relu);
    let mut m = h2.dot(&w2.t());
    add_row_bias(&mut m, b2);

    let att_msg = params.att_weight.slice(s![.., ..d]);
    let att_center = params.att_weight.slice(s![.., d..]);
    let p = m.dot(&att_msg.t());
    let z_self = z.select(Axis(0), &plan.center_rows);
    let mut cc = z_self.dot(&att_center.t());
    add_row_bias(&mut cc, &params.att_bias);

    let n_edges = plan.edge_rows.len();
    let n_c = plan.num_centers();
    let mut alpha = vec![F::zero(); n_edges];
    let mut agg = Array2::<F>::zeros((n_c, d));
    {
        let p = p.as_slice().expect("standard layout");
        let cc = cc.as_slice().expect("standard layout");
        let m = m.as_slice().expect("standard layout");
        let mut g_row = vec![F::zero(); d];
        let agg = agg.as_slice_mut().expect("standard layout");
        let w_att = params.att_vector.as_slice().expect("standard layout");
        let b_att = params.att_offset[0];
        for c in 0..n_c {
            let cc_row = &cc[c * d..(c + 1) * d];
            for e in plan.edge_offsets[c]..plan.edge_offsets[c + 1] {
                let k = plan.edge_rows[e];
                attention_hidden(activation, &p[k * d..(k + 1) * d], cc_row, &mut g_row);
                alpha[e] = b_att + dot(w_att, &g_row);
            }
        }
        for c in 0..n_c {
            let range = plan.edge_offsets[c]..plan.edge_offsets[c + 1];
            let mut max_score = F::neg_infinity();
            for e in range.clone() {
                if alpha[e] > max_score {
                    max_score = alpha[e];
                }
            }
            let mut total = F::zero();
            for e in range.clone() {
                let w = (alpha[e] - max_score).exp();
                alpha[e] = w;
                total += w;
            }
            let agg_row = &mut agg[c * d..(c + 1) * d];
            for e in range {
                alpha[e] /= total;
                let k = plan.edge_rows[e];
                axpy(alpha[e], &m[k * d..(k + 1) * d], agg_row);
            }
        }
    }

    let mut zs = agg.dot(&params.agg_weight.t());
    add_row_bias(&mut zs, &params.agg_bias);
    zs.mapv_inplace(relu);

    Forward {
        plan,
        x_users,
        z,
        h1,
        h2,
        m,
        p,
        cc,
        alpha,
        agg,
        zs,
    }
}

/// Pair scores for a list of (user centre, item centre) index pairs.
#[derive(Debug, Clone)]
pub(crate) struct PairScores<F> {
    /// Pre-clip pair features, one row per pair.
    pub pre: Array2<F>,
    pub scores: Vec<F>,
}

/// User half and item half (with bias) of the pair feature map.
pub(crate) fn score_halves<F: Real>(
    params: &ModelParams<F>,
    user_z: ArrayView2<'_, F>,
    item_z: ArrayView2<'_, F>,
) -> (Array2<F>, Array2<F>) {
    let d = params.dim();
    let a = user_z.dot(&params.score_weight.slice(s![.., ..d]).t());
    let mut b = item_z.dot(&params.score_weight.slice(s![.., d..]).t());
    add_row_bias(&mut b, &params.score_bias);
    (a, b)
}

pub(crate) fn clip01<F: Real>(x: F) -> F {
    x.max(F::zero()).min(F::one())
}

fn score_pairs<F: Real>(
    params: &ModelParams<F>,
    a: &Array2<F>,
    b: &Array2<F>,
    pairs: &[(usize, usize)],
) -> PairScores<F> {
    let d = params.dim();
    let mut pre = Array2::zeros((pairs.len(), d));
    let mut scores = Vec::with_capacity(pairs.len());
    for (t, &(u, v)) in pairs.iter().enumerate() {
        let mut row = pre.row_mut(t);
        let mut s = F::zero();
        for j in 0..d {
            let x = a[[u, j]] + b[[v, j]];
            row[j] = x;
            s += params.projection[j] * clip01(x);
        }
        scores.push(s);
    }
    PairScores { pre, scores }
}

/// Accumulates parameter gradients given `dL/ds` for every scored pair.
#[allow(clippy::too_many_arguments)]
fn backward<F: Real>(
    params: &ModelParams<F>,
    fw: &Forward<F>,
    activation: AttentionActivation,
    pairs: &[(usize, usize)],
    scored: &PairScores<F>,
    d_scores: &[F],
    grads: &mut ModelParams<F>,
) {
    let d = params.dim();
    let plan = &fw.plan;
    let n_uc = plan.user_centers.len();
    let n_c = plan.num_centers();
    let zs_users = fw.zs.slice(s![..n_uc, ..]);
    let zs_items = fw.zs.slice(s![n_uc.., ..]);

    // pair scores
    let mut d_a = Array2::<F>::zeros((n_uc, d));
    let mut d_b = Array2::<F>::zeros((n_c - n_uc, d));
    for (t, &(u, v)) in pairs.iter().enumerate() {
        let ds = d_scores[t];
        if ds == F::zero() {
            continue;
        }
        let pre = scored.pre.row(t);
        for j in 0..d {
            let x = pre[j];
            grads.projection[j] += ds * clip01(x);
            if x > F::zero() && x < F::one() {
                let g = ds * params.projection[j];
                d_a[[u, j]] += g;
                d_b[[v, j]] += g;
            }
        }
    }
    grads.score_bias += &d_b.sum_axis(Axis(0));
    grads
        .score_weight
        .slice_mut(s![.., ..d])
        .scaled_add(F::one(), &d_a.t().dot(&zs_users));
    grads
        .score_weight
        .slice_mut(s![.., d..])
        .scaled_add(F::one(), &d_b.t().dot(&zs_items));
    let mut d_zs = Array2::<F>::zeros((n_c, d));
    d_zs.slice_mut(s![..n_uc, ..])
        .assign(&d_a.dot(&params.score_weight.slice(s![.., ..d])));
    d_zs.slice_mut(s![n_uc.., ..])
        .assign(&d_b.dot(&params.score_weight.slice(s![.., d..])));

    // refined embedding = relu(W agg + b)
    ndarray::Zip::from(&mut d_zs).and(&fw.zs).for_each(|g, &y| {
        if y <= F::zero() {
            *g = F::zero()
        }
    });
    grads.agg_bias += &d_zs.sum_axis(Axis(0));
    grads
        .agg_weight
        .scaled_add(F::one(), &d_zs.t().dot(&fw.agg));
    let d_agg = d_zs.dot(&params.agg_weight);

    // attention-weighted aggregation
    let n_msg = plan.num_messages();
    let mut d_m = Array2::<F>::zeros((n_msg, d));
    let mut d_p = Array2::<F>::zeros((n_msg, d));
    let mut d_cc = Array2::<F>::zeros((n_c, d));
    {
        let d_agg = d_agg.as_slice().expect("standard layout");
        let m = fw.m.as_slice().expect("standard layout");
        let p = fw.p.as_slice().expect("standard layout");
        let cc = fw.cc.as_slice().expect("standard layout");
        let mut g_row = vec![F::zero(); d];
        let w_att = params.att_vector.as_slice().expect("standard layout");
        let dm = d_m.as_slice_mut().expect("standard layout");
        let dp = d_p.as_slice_mut().expect("standard layout");
        let dcc = d_cc.as_slice_mut().expect("standard layout");
        let mut d_vec = vec![F::zero(); d];
        let mut d_off = F::zero();
        let mut d_alpha = Vec::new();
        let mut dpre = vec![F::zero(); d];
        for c in 0..n_c {
            let range = plan.edge_offsets[c]..plan.edge_offsets[c + 1];
            let d_agg_row = &d_agg[c * d..(c + 1) * d];
            d_alpha.clear();
            let mut weighted = F::zero();
            for e in range.clone() {
                let k = plan.edge_rows[e];
                let a = fw.alpha[e];
                let da = dot(d_agg_row, &m[k * d..(k + 1) * d]);
                axpy(a, d_agg_row, &mut dm[k * d..(k + 1) * d]);
                weighted += a * da;
                d_alpha.push(da);
            }
            let dcc_row = &mut dcc[c * d..(c + 1) * d];
            for (i, e) in range.enumerate() {
                let k = plan.edge_rows[e];
                let d_score = fw.alpha[e] * (d_alpha[i] - weighted);
                if d_score == F::zero() {
                    continue;
                }
                d_off += d_score;
                attention_hidden(
                    activation,
                    &p[k * d..(k + 1) * d],
                    &cc[c * d..(c + 1) * d],
                    &mut g_row,
                );
                axpy(d_score, &g_row, &mut d_vec);
                for ((t, &y), &w) in dpre.iter_mut().zip(&g_row).zip(w_att) {
                    *t = d_score * w * activation.derivative_from_output(y);
                }
                add_to(&dpre, &mut dp[k * d..(k + 1) * d]);
                add_to(&dpre, dcc_row);
            }
        }
        grads.att_offset[0] += d_off;
        for (a, &b) in grads.att_vector.iter_mut().zip(&d_vec) {
            *a += b;
        }
    }
    let att_msg = params.att_weight.slice(s![.., ..d]);
    let att_center = params.att_weight.slice(s![.., d..]);
    grads
        .att_weight
        .slice_mut(s![.., ..d])
        .scaled_add(F::one(), &d_p.t().dot(&fw.m));
    d_m += &d_p.dot(&att_msg);
    let z_self = fw.z.select(Axis(0), &plan.center_rows);
    grads
        .att_weight
        .slice_mut(s![.., d..])
        .scaled_add(F::one(), &d_cc.t().dot(&z_self));
    grads.att_bias += &d_cc.sum_axis(Axis(0));
    let d_z_self = d_cc.dot(&att_center);
    let mut d_z = Array2::<F>::zeros((n_msg, d));
    for (c, &r) in plan.center_rows.iter().enumerate() {
        let mut row = d_z.row_mut(r);
        row += &d_z_self.row(c);
    }

    // message MLP
    let [w0, w1, w2] = &params.mlp_weights;
    grads.mlp_biases[2] += &d_m.sum_axis(Axis(0));
    grads.mlp_weights[2].scaled_add(F::one(), &d_m.t().dot(&fw.h2));
    let mut d_h2 = d_m.dot(w2);
    ndarray::Zip::from(&mut d_h2).and(&fw.h2).for_each(|g, &y| {
        if y <= F::zero() {
            *g = F::zero()
        }
    });
    grads.mlp_biases[1] += &d_h2.sum_axis(Axis(0));
    grads.mlp_weights[1].scaled_add(F::one(), &d_h2.t().dot(&fw.h1));
    let mut d_h1 = d_h2.dot(w1);
    ndarray::Zip::from(&mut d_h1).and(&fw.h1).for_each(|g, &y| {
        if y <= F::zero() {
            *g = F::zero()
        }
    });
    grads.mlp_biases[0] += &d_h1.sum_axis(Axis(0));
    grads.mlp_weights[0].scaled_add(F::one(), &d_h1.t().dot(&fw.z));
    d_z += &d_h1.dot(w0);

    // base embeddings
    let n_u = plan.msg_users.len();
    grads
        .user_embedding
        .scaled_add(F::one(), &d_z.slice(s![..n_u, ..]).t().dot(&fw.x_users));
    for (k, &v) in plan.msg_items.iter().enumerate() {
        let mut col = grads.item_embedding.column_mut(v);
        col += &d_z.row(n_u + k);
    }
}

/// Centre layout of a triple batch: sorted unique users and items, and each
/// triple's (user, positive, negative) centre indices.
pub(crate) fn triple_centers(
    triples: &[TrainingTriple],
) -> (Vec<usize>, Vec<usize>, Vec<(usize, usize, usize)>) {
    let mut users: Vec<usize> = triples.iter().map(|t| t.user).collect();
    users.sort_unstable();
    users.dedup();
    let mut items: Vec<usize> = triples
        .iter()
        .flat_map(|t| [t.positive, t.negative])
        .collect();
    items.sort_unstable();
    items.dedup();
    let idx = |list: &[usize], x: usize| list.binary_search(&x).expect("collected above");
    let local = triples
        .iter()
        .map(|t| {
            (
                idx(&users, t.user),
                idx(&items, t.positive),
                idx(&items, t.negative),
            )
        })
        .collect();
    (users, items, local)
}

/// Inputs shared by every forward pass of one model.
#[derive(Debug, Clone, Copy)]
pub struct ModelInputs<'a, F> {
    /// Graph whose edges carry messages (the training graph).
    pub graph: &'a BipartiteGraph,
    /// `|U| x d0` user vectors.
    pub features: ArrayView2<'a, F>,
    pub activation: AttentionActivation,
    /// Neighbour subsampling cap; `None` uses every neighbour.
    pub neighbor_cap: Option<usize>,
}

impl<F: Real> ModelInputs<'_, F> {
    pub(crate) fn check(&self, params: &ModelParams<F>) -> Result<()> {
        if self.features.nrows() != self.graph.num_users {
            return Err(Error::Dimension(format!(
                "{} feature rows for {} users",
                self.features.nrows(),
                self.graph.num_users
            )));
        }
        params.check_shapes(self.features.ncols(), self.graph.num_items)
    }
}

/// Loss of a triple batch under `objective` plus `gamma * ||params||^2`,
/// together with its gradient.
pub fn loss_and_gradient<F: Real, R: Rng + ?Sized>(
    params: &ModelParams<F>,
    inputs: &ModelInputs<'_, F>,
    triples: &[TrainingTriple],
    objective: Objective<'_>,
    gamma: f64,
    rng: &mut R,
) -> Result<(f64, ModelParams<F>)> {
    inputs.check(params)?;
    let (users, items, local) = triple_centers(triples);
    let n_uc = users.len();
    let plan = Plan::build(inputs.graph, users, items, inputs.neighbor_cap, rng);
    let fw = forward(params, inputs.features, inputs.activation, plan);
    let (a, b) = score_halves(
        params,
        fw.zs.slice(s![..n_uc, ..]),
        fw.zs.slice(s![n_uc.., ..]),
    );
    let mut pairs = Vec::with_capacity(2 * local.len());
    for &(u, p, n) in &local {
        pairs.push((u, p));
        pairs.push((u, n));
    }
    let scored = score_pairs(params, &a, &b, &pairs);

    let mut loss = 0.0;
    let mut d_scores = vec![F::zero(); pairs.len()];
    for t in 0..local.len() {
        let diff = (scored.scores[2 * t] - scored.scores[2 * t + 1]).f64();
        let (l, g) = match objective {
            Objective::Bpr => (bpr_term(diff), bpr_term_grad(diff)),
            Objective::Perturbed { .. } => (truncated_bpr_approx(diff), truncated_bpr_grad(diff)),
        };
        loss += l;
        d_scores[2 * t] = F::of(g);
        d_scores[2 * t + 1] = F::of(-g);
    }

    let mut grads = ModelParams::zeros(params.dim(), params.feature_width(), params.num_items());
    backward(
        params,
        &fw,
        inputs.activation,
        &pairs,
        &scored,
        &d_scores,
        &mut grads,
    );

    if let Objective::Perturbed {
        noise,
        dataset_size,
    } = objective
    {
        if noise.dim() != params.dim() {
            return Err(Error::Dimension(format!(
                "noise polynomial of width {} for d = {}",
                noise.dim(),
                params.dim()
            )));
        }
        let weight = triples.len() as f64 / dataset_size.max(1) as f64;
        let h = params.projection.mapv(|x| x.f64());
        loss += weight * noise.evaluate(h.view());
        let g = noise.gradient(h.view());
        for (dst, &src) in grads.projection.iter_mut().zip(g.iter()) {
            *dst += F::of(weight * src);
        }
    }

    if gamma != 0.0 {
        loss += gamma * params.l2_squared().f64();
        grads.add_scaled(F::of(2.0 * gamma), params);
    }
    Ok((loss, grads))
}

/// Value of [`loss_and_gradient`] without the gradient.
pub fn objective_value<F: Real, R: Rng + ?Sized>(
    params: &ModelParams<F>,
    inputs: &ModelInputs<'_, F>,
    triples: &[TrainingTriple],
    objective: Objective<'_>,
    gamma: f64,
    rng: &mut R,
) -> Result<f64> {
    inputs.check(params)?;
    let (users, items, local) = triple_centers(triples);
    let n_uc = users.len();
    let plan = Plan::build(inputs.graph, users, items, inputs.neighbor_cap, rng);
    let fw = forward(params, inputs.features, inputs.activation, plan);
    let (a, b) = score_halves(
        params,
        fw.zs.slice(s![..n_uc, ..]),
        fw.zs.slice(s![n_uc.., ..]),
    );
    let pairs: Vec<(usize, usize)> = local
        .iter()
        .flat_map(|&(u, p, n)| [(u, p), (u, n)])
        .collect();
    let scored = score_pairs(params, &a, &b, &pairs);
    let mut loss = 0.0;
    for t in 0..local.len() {
        let diff = (scored.scores[2 * t] - scored.scores[2 * t + 1]).f64();
        loss += match objective {
            Objective::Bpr => bpr_term(diff),
            Objective::Perturbed { .. } => truncated_bpr_approx(diff),
        };
    }
    if let Objective::Perturbed {
        noise,
        dataset_size,
    } = objective
    {
        let weight = triples.len() as f64 / dataset_size.max(1) as f64;
        let h = params.projection.mapv(|x| x.f64());
        loss += weight * noise.evaluate(h.view());
    }
    Ok(loss + gamma * params.l2_squared().f64())
}
