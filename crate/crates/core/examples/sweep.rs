//! Sweeps one privacy parameter and writes the report as CSV to stdout.
//!
//! cargo run --release --example sweep -- data/ml-100k epsilon_local 1

use std::path::PathBuf;

use privrec::attack::Attribute;
use privrec::data::Dataset;
use privrec::experiment::{run_experiment, write_csv, ExperimentPlan, SweepAxis, Variant};
use privrec::model::TrainConfig;

fn main() -> privrec::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/ml-100k".into()));
    let axis: SweepAxis = args.next().as_deref().unwrap_or("epsilon_local").parse()?;
    let epochs: usize = args.next().map_or(1, |s| s.parse().unwrap());

    let data = Dataset::load_dir(&dir)?;
    let plan = ExperimentPlan {
        variants: vec![Variant::Gerai],
        sweep: Some((axis, axis.default_values())),
        ks: vec![10],
        seeds: vec![1],
        attributes: vec![Attribute::Gender],
        ..Default::default()
    };
    let reports = run_experiment(
        &data,
        &plan,
        &TrainConfig {
            epochs,
            ..Default::default()
        },
    )?;
    write_csv(&reports, std::io::stdout().lock())
}
