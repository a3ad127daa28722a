mod common;

use privrec::data::FeatureKind;
use privrec::experiment::prepare;
use privrec::fm::{draw_noise_polynomial, global_sensitivity, laplace_scale};
use privrec::ldp::{
    choose_zeta, perturb_features, perturb_matrix, piecewise_params, UnaryEncoding,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn piecewise_output_in_support(x in -1.0f64..=1.0, eps in 0.05f64..8.0, seed in any::<u64>()) {
        let pm = piecewise_params(eps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let y = pm.perturb(x, &mut rng).unwrap();
            prop_assert!(y.abs() <= pm.c);
        }
    }

    #[test]
    fn piecewise_density_ratio_bounded(a in -1.0f64..=1.0, b in -1.0f64..=1.0, y in -1.0f64..=1.0, eps in 0.1f64..6.0) {
        let pm = piecewise_params(eps).unwrap();
        let y = y * pm.c;
        let ratio = pm.density(a, y) / pm.density(b, y);
        prop_assert!(ratio <= eps.exp() * (1.0 + 1e-9));
    }

    #[test]
    fn unary_encoding_ratio_bounded(eps in 0.05f64..8.0) {
        let oue = UnaryEncoding::new(eps).unwrap();
        let (p, q) = (oue.keep_one, oue.flip_zero);
        // Two one-hot inputs differ in exactly two bits.
        let worst = (p / q) * ((1.0 - q) / (1.0 - p));
        prop_assert!(worst <= eps.exp() * (1.0 + 1e-12));
    }

    #[test]
    fn zeta_in_range(eps in 0.01f64..200.0, d in 1usize..50) {
        let z = choose_zeta(eps, d);
        prop_assert!(z >= 1 && z <= d);
    }

    #[test]
    fn noise_polynomial_is_symmetric(d in 1usize..8, seed in any::<u64>()) {
        let n = draw_noise_polynomial(d, global_sensitivity(d), 0.4, 1000, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(&n.quadratic, &n.quadratic.t());
        prop_assert_eq!(n.scale, laplace_scale(global_sensitivity(d), 0.4, 1000).unwrap());
    }
}

#[test]
fn masked_slots_are_zero_and_categoricals_binary() {
    let data = common::synthetic_dataset(40, 30, 3);
    let p = prepare(&data, 0.8, 1).unwrap();
    let d_prime = p.schema.d_prime();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for eps in [0.5, 5.0, 10.0, 20.0] {
        for u in 0..p.features.num_users() {
            let v = perturb_features(p.features.row(u), &p.schema, eps, &mut rng).unwrap();
            assert_eq!(v.selected.len(), choose_zeta(eps, d_prime));
            for (i, f) in p.schema.features().iter().enumerate() {
                let seg = v.values.slice(ndarray::s![f.offset..f.offset + f.width]);
                if !v.selected.contains(&i) {
                    assert!(seg.iter().all(|&x| x == 0.0));
                } else if f.kind == FeatureKind::Categorical {
                    assert!(seg.iter().all(|&x| x == 0.0 || x == 1.0));
                }
            }
        }
    }
}

#[test]
fn matrix_perturbation_is_seeded() {
    let data = common::synthetic_dataset(20, 30, 4);
    let p = prepare(&data, 0.8, 1).unwrap();
    let a = perturb_matrix(
        &p.features,
        &p.schema,
        5.0,
        &mut ChaCha8Rng::seed_from_u64(9),
    )
    .unwrap();
    let b = perturb_matrix(
        &p.features,
        &p.schema,
        5.0,
        &mut ChaCha8Rng::seed_from_u64(9),
    )
    .unwrap();
    let c = perturb_matrix(
        &p.features,
        &p.schema,
        5.0,
        &mut ChaCha8Rng::seed_from_u64(10),
    )
    .unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
