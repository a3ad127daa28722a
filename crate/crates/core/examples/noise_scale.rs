//! Sensitivity and Laplace scale of the perturbed objective, and one draw.
//!
//! cargo run --release --example noise_scale

use ndarray::Array1;
use privrec::fm::{draw_noise_polynomial, global_sensitivity, laplace_scale};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> privrec::Result<()> {
    let (eps, n) = (0.4, 80_000);
    println!("{:>4} {:>8} {:>10}", "d", "delta", "scale");
    for d in [20, 40, 60, 80, 100] {
        let delta = global_sensitivity(d);
        println!("{d:>4} {delta:>8} {:>10.5}", laplace_scale(delta, eps, n)?);
    }

    let d = 60;
    let noise = draw_noise_polynomial(
        d,
        global_sensitivity(d),
        eps,
        n,
        &mut ChaCha8Rng::seed_from_u64(1),
    )?;
    let h = Array1::from_elem(d, 0.5);
    println!(
        "{} coefficients; noise at h=0.5: {:.4}",
        noise.num_coefficients(),
        noise.evaluate(h.view())
    );
    Ok(())
}
