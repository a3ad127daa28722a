//! Local perturbation of single values and whole user vectors.
//!
//! cargo run --release --example ldp_perturb -- data/ml-100k

use std::path::PathBuf;

use privrec::data::Dataset;
use privrec::experiment::prepare;
use privrec::ldp::{choose_zeta, perturb_features, piecewise_params, UnaryEncoding};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> privrec::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "data/ml-100k".into()),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    for eps in [0.5, 1.0, 4.0] {
        let pm = piecewise_params(eps)?;
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| pm.perturb(0.3, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        println!(
            "piecewise eps={eps}: range [-{c:.3}, {c:.3}], mean of 0.3 -> {mean:.4}",
            c = pm.c
        );
        let oue = UnaryEncoding::new(eps)?;
        let ones = (0..n).filter(|_| oue.perturb_bit(false, &mut rng)).count();
        println!("  unary 0 -> 1 rate {:.4}", ones as f64 / n as f64);
    }

    let data = Dataset::load_dir(&dir)?;
    let p = prepare(&data, 0.8, 1)?;
    let d_prime = p.schema.d_prime();
    for eps in [0.5, 5.0, 10.0, 20.0] {
        let v = perturb_features(p.features.row(0), &p.schema, eps, &mut rng)?;
        println!(
            "eps_local={eps:>4}: zeta={} kept {:?}, masked {}",
            choose_zeta(eps, d_prime),
            v.selected,
            d_prime - v.selected.len()
        );
    }
    Ok(())
}
