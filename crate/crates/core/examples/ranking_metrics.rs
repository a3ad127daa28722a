//! Hit@K and NDCG@K on hand-made lists.
//!
//! cargo run --example ranking_metrics

use privrec::metrics::{hit_at_k, ndcg_at_k, HitMode};

fn main() -> privrec::Result<()> {
    let recs = vec![vec![3, 1, 4, 5], vec![9, 2, 6, 8], vec![7, 0, 2, 1]];
    let test = vec![vec![4], vec![2, 8], vec![]];
    for k in [1, 2, 4] {
        println!(
            "K={k}: hit(user) {:.3}  hit(pair) {:.3}  ndcg {:.3}",
            hit_at_k(&recs, &test, k, HitMode::User)?,
            hit_at_k(&recs, &test, k, HitMode::Pair)?,
            ndcg_at_k(&recs, &test, k)?
        );
    }
    Ok(())
}
