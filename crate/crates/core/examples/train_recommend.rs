//! Trains the recommender on ML-100K without privacy and prints ranking quality.
//!
//! cargo run --release --example train_recommend -- data/ml-100k 2

use std::path::PathBuf;
use std::time::Instant;

use privrec::data::Dataset;
use privrec::experiment::{prepare, recommend_lists, train_model};
use privrec::metrics::{hit_at_k, ndcg_at_k, HitMode};
use privrec::model::TrainConfig;

fn main() -> privrec::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/ml-100k".into()));
    let epochs: usize = args.next().map_or(2, |s| s.parse().unwrap());

    let data = Dataset::load_dir(&dir)?;
    let prepared = prepare(&data, 0.8, 1)?;
    let config = TrainConfig {
        epochs,
        ..TrainConfig::non_private()
    };

    let start = Instant::now();
    let out = train_model(&data, &prepared.split, &prepared.features, &config, 1)?;
    println!(
        "trained {epochs} epochs in {:.1}s",
        start.elapsed().as_secs_f64()
    );
    for s in &out.history {
        println!("epoch {} loss {:.4}", s.epoch, s.mean_loss);
    }

    let lists = recommend_lists(
        &out.params,
        &prepared.split.train,
        &prepared.features,
        &config,
        10,
    )?;
    let test = &prepared.split.test;
    println!("Hit@10 = {:.4}", hit_at_k(&lists, test, 10, HitMode::User)?);
    println!("NDCG@10 = {:.4}", ndcg_at_k(&lists, test, 10)?);
    Ok(())
}
