//! Compares the four privacy variants on ML-100K.
//!
//! cargo run --release --example ablation -- data/ml-100k 3 1,2

use std::path::PathBuf;

use privrec::attack::{AttackerKind, Attribute};
use privrec::data::Dataset;
use privrec::experiment::{run_point, ExperimentPlan, Variant};
use privrec::model::TrainConfig;

fn main() -> privrec::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/ml-100k".into()));
    let epochs: usize = args.next().map_or(3, |s| s.parse().unwrap());
    let seeds: Vec<u64> = args.next().map_or(vec![1], |s| {
        s.split(',').map(|x| x.parse().unwrap()).collect()
    });

    let data = Dataset::load_dir(&dir)?;
    let plan = ExperimentPlan {
        ks: vec![5, 10],
        seeds,
        attributes: vec![Attribute::Gender],
        attackers: vec![AttackerKind::Nn],
        attack_ks: vec![5],
        ..Default::default()
    };
    let base = TrainConfig {
        epochs,
        ..Default::default()
    };
    println!(
        "{:<10} {:>8} {:>8} {:>10} {:>8}",
        "variant", "Hit@10", "NDCG@10", "gender F1", "seconds"
    );
    for variant in Variant::ALL {
        let r = run_point(&data, &plan, variant, &base, None)?;
        let rank = r.ranking_at(10).unwrap();
        let f1 = r.f1_at(Attribute::Gender, AttackerKind::Nn, 5).unwrap();
        println!(
            "{:<10} {:>8.4} {:>8.4} {:>10.4} {:>8.1}",
            variant.name(),
            rank.hit.mean,
            rank.ndcg.mean,
            f1.mean,
            r.wall_clock_seconds
        );
    }
    Ok(())
}
