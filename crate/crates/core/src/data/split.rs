use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::BipartiteGraph;

/// Per-user holdout of interacted items.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: BipartiteGraph,
    /// Held-out items per user, sorted ascending.
    pub test: Vec<Vec<usize>>,
}

impl DataSplit {
    pub fn num_test_edges(&self) -> usize {
        self.test.iter().map(Vec::len).sum()
    }
}

/// Keeps `ceil(ratio * |N(u)|)` of each user's items for training.
pub fn split_per_user(graph: &BipartiteGraph, ratio: f64, seed: u64) -> DataSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_edges = Vec::with_capacity(graph.num_edges());
    let mut test = Vec::with_capacity(graph.num_users);
    for u in 0..graph.num_users {
        let items = graph.user_neighbors(u);
        let ratings = graph.user_ratings(u);
        let n = items.len();
        let keep = ((ratio * n as f64) - 1e-9).ceil().clamp(0.0, n as f64) as usize;
        let keep = if n > 0 { keep.max(1) } else { 0 };
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for &j in &order[..keep] {
            train_edges.push((u, items[j], ratings[j]));
        }
        let mut held: Vec<usize> = order[keep..].iter().map(|&j| items[j]).collect();
        held.sort_unstable();
        test.push(held);
    }
    let train = BipartiteGraph::from_edges(graph.num_users, graph.num_items, train_edges)
        .expect("subset of a valid graph");
    DataSplit { train, test }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn star(n_items: usize) -> BipartiteGraph {
        BipartiteGraph::from_edges(1, n_items, (0..n_items).map(|v| (0, v, 3))).unwrap()
    }

    #[test]
    fn five_items_split_four_one() {
        let s = split_per_user(&star(5), 0.8, 1);
        assert_eq!(s.train.degree(0), 4);
        assert_eq!(s.test[0].len(), 1);
    }

    #[test]
    fn single_item_stays_in_train() {
        let s = split_per_user(&star(1), 0.8, 1);
        assert_eq!(s.train.degree(0), 1);
        assert!(s.test[0].is_empty());
    }

    #[test]
    fn same_seed_same_split() {
        let g = star(37);
        assert_eq!(split_per_user(&g, 0.8, 9), split_per_user(&g, 0.8, 9));
    }

    proptest! {
        #[test]
        fn split_is_a_partition(
            edges in proptest::collection::vec((0usize..6, 0usize..12, 1u8..=5), 1..60),
            seed in any::<u64>(),
        ) {
            let g = BipartiteGraph::from_edges(6, 12, edges).unwrap();
            let s = split_per_user(&g, 0.8, seed);
            for u in 0..6 {
                let mut all: Vec<usize> = s.train.user_neighbors(u).to_vec();
                for &v in &s.test[u] {
                    prop_assert!(!s.train.contains(u, v));
                    all.push(v);
                }
                all.sort_unstable();
                prop_assert_eq!(all.as_slice(), g.user_neighbors(u));
                let n = g.degree(u);
                if n > 0 {
                    prop_assert_eq!(s.train.degree(u), ((0.8 * n as f64) - 1e-9).ceil() as usize);
                }
            }
        }
    }
}
