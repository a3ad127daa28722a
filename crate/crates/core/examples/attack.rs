//! Attribute inference from interaction histories and popularity-based lists.
//!
//! cargo run --release --example attack -- data/ml-100k

use std::path::PathBuf;

use privrec::attack::{attack_f1, build_attack_dataset, AttackerKind, Attribute, F1Average};
use privrec::data::Dataset;
use privrec::experiment::labels;

fn main() -> privrec::Result<()> {
    env_logger::init();
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "data/ml-100k".into()),
    );
    let data = Dataset::load_dir(&dir)?;
    let g = &data.graph;

    // Most popular unseen items stand in for a recommender's output.
    let mut popular: Vec<usize> = (0..g.num_items).collect();
    popular.sort_by_key(|&v| std::cmp::Reverse(g.item_neighbors(v).len()));
    let recs: Vec<Vec<usize>> = (0..g.num_users)
        .map(|u| {
            popular
                .iter()
                .copied()
                .filter(|&v| !g.contains(u, v))
                .take(10)
                .collect()
        })
        .collect();

    for attribute in Attribute::ALL {
        let set =
            build_attack_dataset(g, &recs, &labels(&data, attribute), attribute.num_classes())?;
        for kind in [
            AttackerKind::Nn,
            AttackerKind::Logreg,
            AttackerKind::Knn,
            AttackerKind::Nb,
        ] {
            let f1 = attack_f1(&set, kind, F1Average::Weighted, 1)?;
            println!("{:<11} {:<7} F1 {f1:.4}", attribute.name(), kind.name());
        }
    }
    Ok(())
}
