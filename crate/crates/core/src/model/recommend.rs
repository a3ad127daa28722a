use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::{clip01, forward, score_halves, ModelInputs, Plan};
use super::{ModelParams, Real};
use crate::error::{Error, Result};

/// Top-K items for one user, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub user: usize,
    pub items: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Pair-feature halves of every user and item, ready for scoring.
#[derive(Debug, Clone)]
pub struct Embeddings<F> {
    user_part: Array2<F>,
    item_part: Array2<F>,
    projection: Vec<F>,
}

impl<F: Real> Embeddings<F> {
    /// Runs the forward pass for every node with all of its neighbours.
    pub fn compute(params: &ModelParams<F>, inputs: &ModelInputs<'_, F>) -> Result<Self> {
        inputs.check(params)?;
        let g = inputs.graph;
        // the plan needs an rng only for subsampling, which is disabled here
        let plan = Plan::build(
            g,
            (0..g.num_users).collect(),
            (0..g.num_items).collect(),
            None,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        let fw = forward(params, inputs.features, inputs.activation, plan);
        let (user_part, item_part) = score_halves(
            params,
            fw.zs.slice(s![..g.num_users, ..]),
            fw.zs.slice(s![g.num_users.., ..]),
        );
        Ok(Embeddings {
            user_part,
            item_part,
            projection: params.projection.to_vec(),
        })
    }

    pub fn num_users(&self) -> usize {
        self.user_part.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.item_part.nrows()
    }

    pub fn score(&self, user: usize, item: usize) -> F {
        let a = self.user_part.row(user);
        let b = self.item_part.row(item);
        let mut s = F::zero();
        for j in 0..self.projection.len() {
            s += self.projection[j] * clip01(a[j] + b[j]);
        }
        s
    }

    /// Top `k` items not in `seen` (sorted ascending), ties broken by item id.
    pub fn rank(&self, user: usize, seen: &[usize], k: usize) -> RankedList {
        let mut cands: Vec<(F, usize)> = (0..self.num_items())
            .filter(|v| seen.binary_search(v).is_err())
            .map(|v| (self.score(user, v), v))
            .collect();
        if k > cands.len() {
            log::warn!(
                "user {user}: K = {k} exceeds {} candidates, returning all",
                cands.len()
            );
        }
        let order = |a: &(F, usize), b: &(F, usize)| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        };
        let k = k.min(cands.len());
        if k < cands.len() && k > 0 {
            cands.select_nth_unstable_by(k - 1, order);
        }
        cands.truncate(k);
        cands.sort_by(order);
        RankedList {
            user,
            items: cands.iter().map(|c| c.1).collect(),
            scores: cands.iter().map(|c| c.0.f64()).collect(),
        }
    }
}

/// Top-K list of one user, excluding their items in `inputs.graph`.
pub fn recommend_topk<F: Real>(
    params: &ModelParams<F>,
    inputs: &ModelInputs<'_, F>,
    user: usize,
    k: usize,
) -> Result<RankedList> {
    if user >= inputs.graph.num_users {
        return Err(Error::Validation(format!("unknown user index {user}")));
    }
    let emb = Embeddings::compute(params, inputs)?;
    Ok(emb.rank(user, inputs.graph.user_neighbors(user), k))
}

/// Top-K lists of every user.
pub fn recommend_all<F: Real>(
    params: &ModelParams<F>,
    inputs: &ModelInputs<'_, F>,
    k: usize,
) -> Result<Vec<RankedList>> {
    let emb = Embeddings::compute(params, inputs)?;
    Ok((0..inputs.graph.num_users)
        .map(|u| emb.rank(u, inputs.graph.user_neighbors(u), k))
        .collect())
}
