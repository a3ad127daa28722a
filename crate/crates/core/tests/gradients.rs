mod common;

use common::gradcheck::{check_instance, instance};
use privrec::model::{
    aggregate_node, base_embeddings, init_params, score_pair, AttentionActivation, Embeddings,
    ModelInputs, ModelParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gradients_match_finite_differences() {
    for (seed, d) in [(1, 2), (2, 4), (3, 4), (4, 2)] {
        let err = check_instance(seed, d);
        assert!(err <= 1e-4, "d={d} seed={seed}: {err}");
    }
}

#[test]
fn batched_scores_match_single_node_evaluation() {
    let inst = instance(7, 5, 6, 3);
    let params: ModelParams<f64> = init_params(4, 3, 6, 0.5, &mut ChaCha8Rng::seed_from_u64(9));
    let activation = AttentionActivation::Sigmoid;
    let inputs = ModelInputs {
        graph: &inst.graph,
        features: inst.features.view(),
        activation,
        neighbor_cap: None,
    };
    let emb = Embeddings::compute(&params, &inputs).unwrap();
    let g = &inst.graph;
    let user_base = |u: usize| base_embeddings(&params, inst.features.row(u), 0).unwrap().0;
    let item_base = |v: usize| base_embeddings(&params, inst.features.row(0), v).unwrap().1;
    for u in 0..g.num_users {
        let nb: Vec<_> = g.user_neighbors(u).iter().map(|&v| item_base(v)).collect();
        let zu = aggregate_node(user_base(u).view(), &nb, &params, activation);
        for v in 0..g.num_items {
            let nb: Vec<_> = g.item_neighbors(v).iter().map(|&w| user_base(w)).collect();
            let zv = aggregate_node(item_base(v).view(), &nb, &params, activation);
            let (_, s) = score_pair(zu.view(), zv.view(), &params);
            assert!(
                (s - emb.score(u, v)).abs() < 1e-12,
                "({u},{v}) {s} vs {}",
                emb.score(u, v)
            );
        }
    }
}
