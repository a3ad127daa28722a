//! Builds the user feature matrix from ML-100K and prints its layout.
//!
//! cargo run --release --example features -- data/ml-100k

use std::path::PathBuf;

use privrec::data::{Dataset, FeatureKind};
use privrec::experiment::prepare;

fn main() -> privrec::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "data/ml-100k".into()),
    );
    let data = Dataset::load_dir(&dir)?;
    println!(
        "{} users, {} items, {} interactions",
        data.graph.num_users,
        data.graph.num_items,
        data.graph.num_edges()
    );

    let p = prepare(&data, 0.8, 1)?;
    println!(
        "train {} / test {} edges; d0 = {}, d' = {}",
        p.split.train.num_edges(),
        p.split.num_test_edges(),
        p.schema.d0(),
        p.schema.d_prime()
    );
    let row = p.features.row(0);
    for f in p.schema.features() {
        let seg = row.slice(ndarray::s![f.offset..f.offset + f.width]);
        match f.kind {
            FeatureKind::Numerical => println!("  {:<16} {:>8.4}", f.name, seg[0]),
            FeatureKind::Categorical => {
                let hot = seg.iter().position(|&v| v == 1.0).unwrap();
                println!("  {:<16} {hot:>8} of {}", f.name, f.width);
            }
        }
    }
    Ok(())
}
